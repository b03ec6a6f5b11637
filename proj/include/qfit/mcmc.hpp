#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qfit/model.hpp"
#include "qfit/rng.hpp"
#include "qfit/volume.hpp"

namespace qfit {

enum class McmcAlgo { mh, ensemble };

struct McmcOptions {
    McmcAlgo algorithm = McmcAlgo::mh;
    int iteration = 20000;
    double burnin = 0.2;   // ratio of discarded initial iterations
    int thinning = 5;
    int Nwalker = 50;      // ensemble only
    double StepSize = 2.0; // ensemble stretch scale a
    std::map<std::string, double> xStepSize;  // MH proposal std, in (ub-lb) units
    int repetition = 1;    // MH independent chains per sample
    uint64_t seed = 0;
    bool keep_samples = false;

    void validate(int n_params) const;
};

struct PosteriorSummary {
    std::vector<std::string> names;       // includes the noise parameter
    Matrix mean;                          // (n_samples x n_params)
    Matrix stdev;                         // (n_samples x n_params)
    std::vector<double> acceptance_rate;  // per sample
    int n_retained = 0;                   // retained draws per chain
    // keep_samples: per param, (n_samples x n_retained*chains_per_sample)
    std::vector<Matrix> retained;
};

// Batch log-density callback: `states` is (k x d); sample_ids[i] names the
// data sample row i belongs to (test densities may ignore it).
using LogDensityFn =
    std::function<std::vector<double>(const Matrix& states, const std::vector<int>& sample_ids)>;

// One lockstep Metropolis-Hastings sweep with a joint normal proposal.
// Randomness is keyed by (seed, sample_ids[c], walker_ids[c], iter, slot),
// so a scalar per-sample loop consuming the same keys is bit-identical.
void mh_move(Matrix& states, std::vector<double>& logp, const LogDensityFn& f,
             const std::vector<double>& step_std, const std::vector<int>& sample_ids,
             const std::vector<int>& walker_ids, const CounterRng& rng, uint64_t iter,
             std::vector<uint8_t>* accepted);

// Affine-invariant stretch move over two alternating half-ensembles.
// Chains are laid out sample-major: chain = sample*n_walkers + walker.
void stretch_move(Matrix& states, std::vector<double>& logp, const LogDensityFn& f, double a,
                  int n_samples, int n_walkers, int sample_id_offset, const CounterRng& rng,
                  uint64_t iter, std::vector<uint8_t>* accepted);

// Inverse-CDF draw for the stretch variable, density proportional to
// 1/sqrt(z) on [1/a, a].
double stretch_z_draw(double u, double a);

// Per-sample Gaussian log likelihood with uniform-in-bounds prior; the
// ParamSet must include a "noise" entry. Out-of-bounds values map to -inf.
std::vector<double> log_posterior(const ParamSet& theta_with_noise, const MeasuredData& data,
                                  const Protocol& prot, const Model& model);

PosteriorSummary mcmc_run(const ParamSet& x0, const MeasuredData& data, const Protocol& prot,
                          const Model& model, const McmcOptions& options);

// Reference implementation: one sample at a time, same RNG keys. Used to
// check that the vectorized MH path is numerically identical.
PosteriorSummary mcmc_run_scalar_reference(const ParamSet& x0, const MeasuredData& data,
                                           const Protocol& prot, const Model& model,
                                           const McmcOptions& options);

}  // namespace qfit
