#include "qfit/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "qfit/rng.hpp"
#include "qfit/simulate.hpp"

namespace qfit {

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

ParamSet initial_guess(const Model& model, int n) {
    ParamSet x0;
    for (const auto& pd : model.params) {
        ParamSet::Entry e;
        e.name = pd.name;
        e.lb = pd.lb;
        e.ub = pd.ub;
        e.values.assign(n, pd.init);
        x0.params.push_back(std::move(e));
    }
    return x0;
}

}  // namespace

ParamSet default_truth(const Model& model, int n_samples, uint64_t seed) {
    CounterRng rng{seed};
    ParamSet truth;
    for (size_t p = 0; p < model.params.size(); ++p) {
        const auto& pd = model.params[p];
        ParamSet::Entry e;
        e.name = pd.name;
        e.lb = pd.lb;
        e.ub = pd.ub;
        e.values.resize(n_samples);
        // spread over the central 60% of the box
        double lo = pd.lb + 0.2 * (pd.ub - pd.lb);
        double hi = pd.ub - 0.2 * (pd.ub - pd.lb);
        for (int s = 0; s < n_samples; ++s)
            e.values[s] = lo + (hi - lo) * rng.uniform(s, p, 0, 0);
        truth.params.push_back(std::move(e));
    }
    return truth;
}

BenchReport bench_scaling(const Model& model, const Protocol& prot, const BenchOptions& options) {
    if (options.sample_counts.empty()) throw ConfigError("bench: no sample counts");
    if (!std::is_sorted(options.sample_counts.begin(), options.sample_counts.end()))
        throw ConfigError("bench: sample counts must be ascending");
    if (options.repeats < 1) throw ConfigError("bench: repeats must be >= 1");

    BenchReport report;
    double oracle_per_sample = -1.0;

    for (const std::string& solver : options.solvers) {
        for (int count : options.sample_counts) {
            ParamSet truth = default_truth(model, count, options.seed);
            MeasuredData data =
                simulate(model, truth, prot, options.snr, NoiseKind::gaussian, options.seed + 1);
            ParamSet x0 = initial_guess(model, count);

            for (int rep = 0; rep < options.repeats; ++rep) {
                BenchRow row;
                row.solver = solver;
                row.count = count;
                row.repeat = rep;
                if (solver == "nlls_oracle" && count != options.sample_counts.front()) {
                    if (oracle_per_sample < 0.0)
                        throw ConfigError("bench: oracle must run at the smallest count first");
                    row.per_sample_s = oracle_per_sample;
                    row.wall_s = oracle_per_sample * count;
                    row.extrapolated = true;
                    report.rows.push_back(std::move(row));
                    continue;
                }

                double t0 = now_s();
                if (solver == "adam") {
                    fit_gd(x0, data, prot, model, options.gd);
                } else if (solver == "mh" || solver == "ensemble") {
                    McmcOptions mo = options.mcmc;
                    mo.algorithm = solver == "mh" ? McmcAlgo::mh : McmcAlgo::ensemble;
                    ParamSet xm = x0;
                    ParamSet::Entry noise;
                    noise.name = "noise";
                    noise.lb = 1e-3;
                    noise.ub = 1.0;
                    noise.values.assign(count, 0.05);
                    xm.params.push_back(std::move(noise));
                    mcmc_run(xm, data, prot, model, mo);
                } else if (solver == "nlls_oracle") {
                    nlls_fit(x0, data, prot, model, options.nlls);
                } else {
                    throw ConfigError("bench: unknown solver '" + solver + "'");
                }
                row.wall_s = now_s() - t0;
                row.per_sample_s = row.wall_s / count;
                if (solver == "nlls_oracle")
                    oracle_per_sample = oracle_per_sample < 0.0
                                            ? row.per_sample_s
                                            : std::min(oracle_per_sample, row.per_sample_s);
                report.rows.push_back(std::move(row));
            }
        }
    }
    return report;
}

void write_bench_csv(const std::string& path, const BenchReport& report) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write file: " + path);
    f << "solver,count,repeat,wall_s,per_sample_s,extrapolated\n";
    char buf[64];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%.6g,%.6g", r.wall_s, r.per_sample_s);
        f << r.solver << "," << r.count << "," << r.repeat << "," << buf << ","
          << (r.extrapolated ? 1 : 0) << "\n";
    }
}

}  // namespace qfit
