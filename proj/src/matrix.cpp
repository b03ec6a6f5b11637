#include "qfit/matrix.hpp"

#include <cmath>

namespace qfit {

namespace {
constexpr size_t kPairwiseBase = 64;
}

double pairwise_sum(const double* p, size_t n) {
    if (n <= kPairwiseBase) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += p[i];
        return s;
    }
    size_t half = n / 2;
    return pairwise_sum(p, half) + pairwise_sum(p + half, n - half);
}

bool all_finite(const Matrix& m) {
    for (double x : m.v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace qfit
