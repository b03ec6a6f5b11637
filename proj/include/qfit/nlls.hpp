#pragma once

#include <cstdint>

#include "qfit/model.hpp"
#include "qfit/volume.hpp"

namespace qfit {

struct NllsOptions {
    int max_iter = 200;
    double ftol = 1e-12;     // relative cost decrease
    double xtol = 1e-10;     // step size, relative to bound span
    int multi_starts = 3;    // default init plus random restarts
    uint64_t seed = 0;
};

struct NllsResult {
    ParamSet final;
    std::vector<double> cost;        // per sample, best sum of squares
    std::vector<uint8_t> converged;  // per sample
};

// Per-sample bounded Levenberg-Marquardt with a finite-difference Jacobian,
// used as an independent least-squares reference for the batched solver.
NllsResult nlls_fit(const ParamSet& x0, const MeasuredData& data, const Protocol& prot,
                    const Model& model, const NllsOptions& options = {});

}  // namespace qfit
