#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qfit/mcmc.hpp"
#include "qfit/model.hpp"
#include "qfit/nlls.hpp"
#include "qfit/solver.hpp"

namespace qfit {

struct BenchRow {
    std::string solver;
    int count = 0;
    int repeat = 0;
    double wall_s = 0.0;
    double per_sample_s = 0.0;
    bool extrapolated = false;  // nlls_oracle rows beyond the smallest count
};

struct BenchReport {
    std::vector<BenchRow> rows;
};

struct BenchOptions {
    std::vector<int> sample_counts{100, 1000, 10000};
    std::vector<std::string> solvers{"adam"};  // adam | mh | ensemble | nlls_oracle
    int repeats = 3;
    double snr = 50.0;
    uint64_t seed = 0;
    SolverOptions gd;
    McmcOptions mcmc;
    NllsOptions nlls;
};

// Times each solver at each sample count on simulated data. The per-sample
// NLLS oracle is timed at the smallest count only and extrapolated linearly
// to the larger ones.
BenchReport bench_scaling(const Model& model, const Protocol& prot, const BenchOptions& options);

void write_bench_csv(const std::string& path, const BenchReport& report);

// In-bounds truth fields used by bench and the simulate subcommand.
ParamSet default_truth(const Model& model, int n_samples, uint64_t seed);

}  // namespace qfit
