#include "qfit/stats.hpp"

#include <algorithm>
#include <cmath>

#include "qfit/errors.hpp"

namespace qfit {

double mean(const std::vector<double>& x) {
    if (x.empty()) throw DataError("mean: empty input");
    double s = 0.0;
    for (double v : x) s += v;
    return s / x.size();
}

double sample_std(const std::vector<double>& x) {
    if (x.size() < 2) throw DataError("sample_std: need at least 2 values");
    double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / (x.size() - 1));
}

double cov(const std::vector<double>& x) {
    double m = mean(x);
    if (m == 0.0) throw DataError("cov: zero mean");
    return sample_std(x) / m;
}

BlandAltman bland_altman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("bland_altman: size mismatch");
    if (a.size() < 2) throw DataError("bland_altman: need at least 2 pairs");
    std::vector<double> d(a.size());
    for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    BlandAltman r;
    r.bias = mean(d);
    double sd = sample_std(d);
    r.loa_low = r.bias - 1.96 * sd;
    r.loa_high = r.bias + 1.96 * sd;
    return r;
}

double quantile(std::vector<double> x, double q) {
    if (x.empty()) throw DataError("quantile: empty input");
    if (q < 0.0 || q > 1.0) throw ConfigError("quantile: q must be in [0, 1]");
    std::sort(x.begin(), x.end());
    double pos = q * (x.size() - 1);
    size_t lo = static_cast<size_t>(pos);
    size_t hi = std::min(lo + 1, x.size() - 1);
    double frac = pos - lo;
    return x[lo] * (1.0 - frac) + x[hi] * frac;
}

double iqr(const std::vector<double>& x) {
    return quantile(x, 0.75) - quantile(x, 0.25);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("pearson: size mismatch");
    if (a.size() < 2) throw DataError("pearson: need at least 2 pairs");
    double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) throw DataError("pearson: zero variance");
    return sab / std::sqrt(saa * sbb);
}

}  // namespace qfit
