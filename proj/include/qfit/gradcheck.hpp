#pragma once

#include <cstdint>
#include <string>

#include "qfit/model.hpp"
#include "qfit/regularizers.hpp"
#include "qfit/solver.hpp"

namespace qfit {

struct GradCheckResult {
    double max_rel_err = 0.0;
    int n_checked = 0;
};

// Compares tape gradients of the fitting objective against central finite
// differences (step 1e-6) at random in-bounds parameter points. Points are
// kept away from bounds and from L1 kinks so the comparison is on smooth
// ground. Relative error uses max(|fd|, 1e-8) in the denominator.
GradCheckResult gradcheck_model(const Model& model, const Protocol& prot, LossKind loss,
                                int n_points, uint64_t seed);

// Same check for a single regularizer term on a random field over a small
// grid graph (tv_graph) or with random mu/sigma (prior).
GradCheckResult gradcheck_regularizer(RegKind kind, int n_points, uint64_t seed);

// Convenience protocol suitable for any built-in model name.
Protocol default_protocol(const std::string& model_name);

}  // namespace qfit
