#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qfit/model.hpp"
#include "qfit/regularizers.hpp"
#include "qfit/volume.hpp"

namespace qfit {

enum class OptimizerKind { adam, sgdm, rmsprop };
enum class LossKind { l1, l2 };
enum class StopReason { tol, max_iter, converged, diverged };

struct SolverOptions {
    OptimizerKind optimizer = OptimizerKind::adam;
    double initialLearnRate = 0.001;
    LossKind lossFunction = LossKind::l1;
    int iteration = 4000;
    double tol = 1e-4;
    double convergenceValue = 1e-8;
    int convergenceWindow = 20;
    std::vector<Regularizer> regularizers;
    uint64_t seed = 0;
    bool verbose = false;

    void validate() const;
};

struct FitResult {
    ParamSet final;  // best-loss iterate
    std::vector<double> loss_history;
    int iterations_run = 0;
    StopReason stop_reason = StopReason::max_iter;
    double best_loss = 0.0;
};

// Box-constraint transform: theta = lb + (ub-lb)*sigmoid(z). Inputs are
// clamped to [lb + eps_b, ub - eps_b] with eps_b = 1e-6*(ub-lb) before
// inversion, so z stays finite at the bounds.
std::vector<double> to_unconstrained(const std::vector<double>& theta, double lb, double ub);
std::vector<double> from_unconstrained(const std::vector<double>& z, double lb, double ub);

// Differentiable bound mapping used inside the objective.
Var bound_transform(Tape& t, Var z, double lb, double ub);

// Data loss + regularization, normalized by the number of active entries.
Var objective(Tape& t, const std::map<std::string, Var>& theta, const MeasuredData& data,
              const Protocol& prot, const Model& model, LossKind loss,
              const std::vector<Regularizer>& regs);

struct AdamState {
    std::vector<double> m, v;
};
struct SgdmState {
    std::vector<double> v;
};
struct RmspropState {
    std::vector<double> s;
};

void adam_step(std::vector<double>& z, const std::vector<double>& grad, AdamState& st, double lr,
               int iter, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
void sgdm_step(std::vector<double>& z, const std::vector<double>& grad, SgdmState& st, double lr,
               double momentum = 0.9);
void rmsprop_step(std::vector<double>& z, const std::vector<double>& grad, RmspropState& st,
                  double lr, double rho = 0.99, double eps = 1e-8);

std::optional<StopReason> check_stop(const std::vector<double>& loss_history,
                                     const SolverOptions& options);

// Least-squares slope of y over the last `window` entries.
double trailing_slope(const std::vector<double>& y, int window);

FitResult fit_gd(const ParamSet& x0, const MeasuredData& data, const Protocol& prot,
                 const Model& model, const SolverOptions& options);

}  // namespace qfit
