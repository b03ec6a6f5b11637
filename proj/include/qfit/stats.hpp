#pragma once

#include <vector>

namespace qfit {

struct BlandAltman {
    double bias = 0.0;       // mean(a - b)
    double loa_low = 0.0;    // bias - 1.96 * sd(a - b)
    double loa_high = 0.0;   // bias + 1.96 * sd(a - b)
};

BlandAltman bland_altman(const std::vector<double>& a, const std::vector<double>& b);

double mean(const std::vector<double>& x);
double sample_std(const std::vector<double>& x);  // n-1 denominator

// coefficient of variation: sample std over mean
double cov(const std::vector<double>& x);

// linear-interpolation quantile, q in [0, 1]
double quantile(std::vector<double> x, double q);
double iqr(const std::vector<double>& x);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace qfit
