#include "qfit/simulate.hpp"

#include <cmath>

#include "qfit/parallel.hpp"
#include "qfit/rng.hpp"

namespace qfit {

Matrix predict(const Model& model, const ParamSet& truth, const Protocol& prot) {
    truth.validate();
    model.check_protocol(prot);
    std::vector<std::vector<double>> fields;
    fields.reserve(model.params.size());
    for (const auto& pd : model.params) fields.push_back(truth.find(pd.name).values);
    return model.predict(fields, prot);
}

MeasuredData simulate(const Model& model, const ParamSet& truth, const Protocol& prot,
                      double snr, NoiseKind noise, uint64_t seed) {
    if (!(snr > 0.0)) throw ConfigError("simulate: snr must be > 0");
    Matrix clean = predict(model, truth, prot);
    const int n = clean.rows, m = clean.cols;

    std::vector<double> sigma(n);
    if (truth.has("S0")) {
        const auto& s0 = truth.find("S0").values;
        for (int i = 0; i < n; ++i) sigma[i] = s0[i] / snr;
    } else {
        for (int i = 0; i < n; ++i) {
            double ref = std::abs(clean(i, 0));
            sigma[i] = (ref > 0.0 ? ref : 1.0) / snr;
        }
    }

    CounterRng rng{seed};
    MeasuredData out;
    out.values = Matrix(n, m);
    parallel_for(static_cast<size_t>(n), [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i)
            for (int j = 0; j < m; ++j) {
                double s = clean(static_cast<int>(i), j);
                if (noise == NoiseKind::gaussian) {
                    out.values(static_cast<int>(i), j) =
                        s + sigma[i] * rng.normal(i, 0, 0, 2 * j);
                } else {
                    double re = s + sigma[i] * rng.normal(i, 0, 0, 2 * j);
                    double im = sigma[i] * rng.normal(i, 0, 0, 2 * j + 1);
                    out.values(static_cast<int>(i), j) = std::hypot(re, im);
                }
            }
    });
    return out;
}

}  // namespace qfit
