#pragma once

#include <cstdint>

namespace qfit {

// Inverse of the standard normal CDF (Acklam's rational approximation,
// refined with one Halley step; absolute error well below 1e-12).
double inv_normal_cdf(double p);

// Stateless counter-keyed random stream. Every draw is a pure function of
// (seed, sample, walker, iteration, slot), which makes vectorized and
// scalar code paths consume identical randomness and keeps runs
// reproducible across worker counts.
struct CounterRng {
    uint64_t seed = 0;

    CounterRng() = default;
    explicit CounterRng(uint64_t s) : seed(s) {}

    static uint64_t mix(uint64_t x);

    uint64_t word(uint64_t sample, uint64_t walker, uint64_t iter, uint64_t slot) const;

    // Uniform in (0, 1), never exactly 0 or 1.
    double uniform(uint64_t sample, uint64_t walker, uint64_t iter, uint64_t slot) const;

    double normal(uint64_t sample, uint64_t walker, uint64_t iter, uint64_t slot) const;
};

}  // namespace qfit
