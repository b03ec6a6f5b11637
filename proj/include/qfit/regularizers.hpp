#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "qfit/tape.hpp"
#include "qfit/volume.hpp"

namespace qfit {

enum class RegKind { tv_graph, prior, custom };

// One regularization term added to the solver objective with weight lambda.
// tv_graph and prior apply to each named target parameter; custom receives
// the full bounded-space parameter map and must return a scalar.
struct Regularizer {
    RegKind kind = RegKind::tv_graph;
    std::vector<std::string> target_params;
    double lambda = 0.0;
    NeighborGraph graph;              // tv_graph
    std::vector<double> mu, sigma;    // prior; size 1 or n_samples
    std::function<Var(Tape&, const std::map<std::string, Var>&)> custom;

    void validate() const;
};

// R = sum over edges of smooth_abs(theta_i - theta_j; 1e-12) / n_edges.
Var tv_graph_term(Tape& t, Var field, const NeighborGraph& graph);

// mean over samples of smooth_abs((theta - mu) / sigma; 1e-12).
Var prior_penalty_term(Tape& t, Var field, const std::vector<double>& mu,
                       const std::vector<double>& sigma);

// Sum of all regularizer terms, weighted. `theta` maps parameter name to
// its bounded-space (n,1) variable.
Var regularization_total(Tape& t, const std::map<std::string, Var>& theta,
                         const std::vector<Regularizer>& regs);

}  // namespace qfit
