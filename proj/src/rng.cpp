#include "qfit/rng.hpp"

#include <cmath>

#include "qfit/errors.hpp"

namespace qfit {

namespace {

// Acklam's coefficients for the inverse normal CDF.
constexpr double a_[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                         -2.759285104469687e+02, 1.383577518672690e+02,
                         -3.066479806614716e+01, 2.506628277459239e+00};
constexpr double b_[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                         -1.556989798598866e+02, 6.680131188771972e+01,
                         -1.328068155288572e+01};
constexpr double c_[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                         -2.400758277161838e+00, -2.549732539343734e+00,
                         4.374664141464968e+00,  2.938163982698783e+00};
constexpr double d_[] = {7.784695709041462e-03, 3.224671290700398e-01,
                         2.445134137142996e+00, 3.754408661907416e+00};

double acklam(double p) {
    const double plow = 0.02425;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c_[0] * q + c_[1]) * q + c_[2]) * q + c_[3]) * q + c_[4]) * q + c_[5]) /
               ((((d_[0] * q + d_[1]) * q + d_[2]) * q + d_[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c_[0] * q + c_[1]) * q + c_[2]) * q + c_[3]) * q + c_[4]) * q + c_[5]) /
               ((((d_[0] * q + d_[1]) * q + d_[2]) * q + d_[3]) * q + 1.0);
    }
    double q = p - 0.5;
    double r = q * q;
    return (((((a_[0] * r + a_[1]) * r + a_[2]) * r + a_[3]) * r + a_[4]) * r + a_[5]) * q /
           (((((b_[0] * r + b_[1]) * r + b_[2]) * r + b_[3]) * r + b_[4]) * r + 1.0);
}

}  // namespace

double inv_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("inv_normal_cdf: p must be in (0, 1)");
    double x = acklam(p);
    // One Halley refinement against erfc.
    double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

uint64_t CounterRng::mix(uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t CounterRng::word(uint64_t sample, uint64_t walker, uint64_t iter, uint64_t slot) const {
    uint64_t h = mix(seed ^ 0x6a09e667f3bcc908ULL);
    h = mix(h ^ sample);
    h = mix(h ^ walker);
    h = mix(h ^ iter);
    h = mix(h ^ slot);
    return h;
}

double CounterRng::uniform(uint64_t sample, uint64_t walker, uint64_t iter, uint64_t slot) const {
    uint64_t w = word(sample, walker, iter, slot);
    double u = (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
    return u;
}

double CounterRng::normal(uint64_t sample, uint64_t walker, uint64_t iter, uint64_t slot) const {
    return inv_normal_cdf(uniform(sample, walker, iter, slot));
}

}  // namespace qfit
