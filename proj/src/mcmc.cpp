#include "qfit/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qfit {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Shared likelihood machinery for both the vectorized and the scalar
// reference paths; per-row arithmetic is independent of batch size so the
// two consume identical floating-point operations.
struct Posterior {
    const MeasuredData* data;
    const Protocol* prot;
    const Model* model;
    std::vector<std::pair<double, double>> bounds;  // model params then noise
    int d = 0;

    std::vector<double> eval(const Matrix& states, const std::vector<int>& sample_ids) const {
        const int k = states.rows;
        const int n_model = d - 1;
        const int m = data->n_meas();

        std::vector<uint8_t> in_bounds(k, 1);
        std::vector<std::vector<double>> fields(n_model, std::vector<double>(k));
        for (int c = 0; c < k; ++c) {
            for (int p = 0; p < d; ++p) {
                double x = states(c, p);
                if (x < bounds[p].first || x > bounds[p].second) in_bounds[c] = 0;
            }
            for (int p = 0; p < n_model; ++p)
                fields[p][c] = std::clamp(states(c, p), bounds[p].first, bounds[p].second);
        }

        // Per-sample protocol axes need gathering when rows are batched.
        Protocol prot_k;
        const Protocol* pp = prot;
        bool gathered = false;
        for (const auto& ax : prot->axes) {
            if (ax.values.rows > 1) {
                if (!gathered) {
                    prot_k = *prot;
                    gathered = true;
                }
                Matrix g(k, ax.values.cols);
                for (int i = 0; i < k; ++i)
                    for (int j = 0; j < ax.values.cols; ++j)
                        g(i, j) = ax.values(sample_ids[i], j);
                for (auto& a2 : prot_k.axes)
                    if (a2.name == ax.name) a2.values = std::move(g);
            }
        }
        if (gathered) pp = &prot_k;

        Matrix pred = model->predict(fields, *pp);

        std::vector<double> out(k);
        std::vector<double> sq(m);
        const bool have_w = !data->weights.empty();
        const double noise_lb = bounds[d - 1].first;
        for (int c = 0; c < k; ++c) {
            if (!in_bounds[c]) {
                out[c] = kNegInf;
                continue;
            }
            int s = sample_ids[c];
            double sigma = std::max(states(c, d - 1), noise_lb);
            for (int j = 0; j < m; ++j) {
                double w = have_w ? data->weights(s, j) : 1.0;
                double r = data->values(s, j) - pred(c, j);
                sq[j] = w * w * r * r;
            }
            double ssq = pairwise_sum(sq.data(), sq.size());
            out[c] = -0.5 * m * std::log(2.0 * M_PI * sigma * sigma) -
                     ssq / (2.0 * sigma * sigma);
        }
        return out;
    }
};

struct RunningMoments {
    std::vector<long> count;  // per sample
    Matrix mean, m2;

    RunningMoments(int n, int d) : count(n, 0), mean(n, d), m2(n, d) {}

    void add(int s, const Matrix& states, int chain) {
        ++count[s];
        for (int p = 0; p < states.cols; ++p) {
            double x = states(chain, p);
            double delta = x - mean(s, p);
            mean(s, p) += delta / static_cast<double>(count[s]);
            m2(s, p) += delta * (x - mean(s, p));
        }
    }
};

struct ChainSetup {
    std::vector<std::string> names;
    std::vector<std::pair<double, double>> bounds;
    int d;
    int n_walkers;
};

ChainSetup make_setup(const ParamSet& x0, const Model& model, const McmcOptions& opts) {
    ChainSetup cs;
    for (const auto& pd : model.params) {
        const auto& e = x0.find(pd.name);
        cs.names.push_back(pd.name);
        cs.bounds.emplace_back(e.lb, e.ub);
    }
    if (!x0.has("noise"))
        throw ConfigError("mcmc: x0 must include a 'noise' parameter with bounds");
    const auto& ne = x0.find("noise");
    cs.names.push_back("noise");
    cs.bounds.emplace_back(ne.lb, ne.ub);
    cs.d = static_cast<int>(cs.names.size());
    cs.n_walkers = (opts.algorithm == McmcAlgo::ensemble) ? opts.Nwalker
                                                          : std::max(1, opts.repetition);
    return cs;
}

int burn_count(const McmcOptions& o) {
    return static_cast<int>(std::floor(o.burnin * o.iteration));
}

int kept_count(const McmcOptions& o) {
    return (o.iteration - burn_count(o)) / o.thinning;
}

}  // namespace

void McmcOptions::validate(int n_params) const {
    if (iteration < 1) throw ConfigError("mcmc: iteration must be >= 1");
    if (burnin < 0.0 || burnin >= 1.0) throw ConfigError("mcmc: burnin must be in [0,1)");
    if (thinning < 1) throw ConfigError("mcmc: thinning must be >= 1");
    if (algorithm == McmcAlgo::ensemble) {
        if (Nwalker % 2 != 0) throw ConfigError("mcmc: Nwalker must be even");
        if (Nwalker < 2 * n_params + 2)
            throw ConfigError("mcmc: Nwalker must be >= 2*n_params + 2");
        if (!(StepSize > 1.0)) throw ConfigError("mcmc: StepSize must be > 1");
    } else {
        if (repetition < 1) throw ConfigError("mcmc: repetition must be >= 1");
    }
    if (kept_count(*this) < 1)
        throw ConfigError("mcmc: retained draw count is zero; reduce burnin/thinning");
}

double stretch_z_draw(double u, double a) {
    double sa = std::sqrt(a);
    double r = u * (sa - 1.0 / sa) + 1.0 / sa;
    return r * r;
}

void mh_move(Matrix& states, std::vector<double>& logp, const LogDensityFn& f,
             const std::vector<double>& step_std, const std::vector<int>& sample_ids,
             const std::vector<int>& walker_ids, const CounterRng& rng, uint64_t iter,
             std::vector<uint8_t>* accepted) {
    const int k = states.rows;
    const int d = states.cols;
    Matrix prop(k, d);
    for (int c = 0; c < k; ++c) {
        uint64_t s = sample_ids[c], w = walker_ids[c];
        for (int p = 0; p < d; ++p)
            prop(c, p) = states(c, p) + step_std[p] * rng.normal(s, w, iter, p);
    }
    std::vector<double> lp_new = f(prop, sample_ids);
    for (int c = 0; c < k; ++c) {
        uint64_t s = sample_ids[c], w = walker_ids[c];
        double u = rng.uniform(s, w, iter, static_cast<uint64_t>(d));
        bool acc = std::log(u) < lp_new[c] - logp[c];
        if (acc) {
            for (int p = 0; p < d; ++p) states(c, p) = prop(c, p);
            logp[c] = lp_new[c];
        }
        if (accepted) (*accepted)[c] = acc ? 1 : 0;
    }
}

void stretch_move(Matrix& states, std::vector<double>& logp, const LogDensityFn& f, double a,
                  int n_samples, int n_walkers, int sample_id_offset, const CounterRng& rng,
                  uint64_t iter, std::vector<uint8_t>* accepted) {
    if (n_walkers % 2 != 0) throw ConfigError("stretch_move: walker count must be even");
    const int d = states.cols;
    const int half = n_walkers / 2;

    for (int phase = 0; phase < 2; ++phase) {
        const int w_begin = phase * half;
        const int other_begin = (1 - phase) * half;
        const int k = n_samples * half;
        Matrix prop(k, d);
        std::vector<int> ids(k);
        std::vector<double> zs(k);
        std::vector<int> chains(k);
        int row = 0;
        for (int s = 0; s < n_samples; ++s) {
            for (int wi = 0; wi < half; ++wi) {
                int w = w_begin + wi;
                int c = s * n_walkers + w;
                uint64_t sid = static_cast<uint64_t>(s + sample_id_offset);
                double u1 = rng.uniform(sid, w, iter, 0);
                int j = other_begin + std::min(half - 1, static_cast<int>(u1 * half));
                int cj = s * n_walkers + j;
                double z = stretch_z_draw(rng.uniform(sid, w, iter, 1), a);
                for (int p = 0; p < d; ++p)
                    prop(row, p) = states(cj, p) + z * (states(c, p) - states(cj, p));
                ids[row] = s + sample_id_offset;
                zs[row] = z;
                chains[row] = c;
                ++row;
            }
        }
        std::vector<double> lp_new = f(prop, ids);
        row = 0;
        for (int s = 0; s < n_samples; ++s) {
            for (int wi = 0; wi < half; ++wi) {
                int w = w_begin + wi;
                int c = chains[row];
                uint64_t sid = static_cast<uint64_t>(s + sample_id_offset);
                double u3 = rng.uniform(sid, w, iter, 2);
                double log_ratio = (d - 1) * std::log(zs[row]) + lp_new[row] - logp[c];
                bool acc = std::log(u3) < log_ratio;
                if (acc) {
                    for (int p = 0; p < d; ++p) states(c, p) = prop(row, p);
                    logp[c] = lp_new[row];
                }
                if (accepted) (*accepted)[c] = acc ? 1 : 0;
                ++row;
            }
        }
    }
}

std::vector<double> log_posterior(const ParamSet& theta_with_noise, const MeasuredData& data,
                                  const Protocol& prot, const Model& model) {
    McmcOptions dummy;
    ChainSetup cs = make_setup(theta_with_noise, model, dummy);
    Posterior post{&data, &prot, &model, cs.bounds, cs.d};
    int n = theta_with_noise.n_samples();
    Matrix states(n, cs.d);
    for (int p = 0; p < cs.d; ++p) {
        const auto& e = theta_with_noise.find(cs.names[p]);
        for (int s = 0; s < n; ++s) states(s, p) = e.values[s];
    }
    std::vector<int> ids(n);
    for (int s = 0; s < n; ++s) ids[s] = s;
    return post.eval(states, ids);
}

namespace {

PosteriorSummary run_impl(const ParamSet& x0, const MeasuredData& data, const Protocol& prot,
                          const Model& model, const McmcOptions& opts, bool scalar_reference) {
    data.validate();
    model.check_protocol(prot);
    ChainSetup cs = make_setup(x0, model, opts);
    opts.validate(cs.d);
    if (scalar_reference && opts.algorithm != McmcAlgo::mh)
        throw ConfigError("mcmc: scalar reference path supports MH only");
    if (x0.n_samples() != data.n_samples())
        throw ShapeError("mcmc: x0 sample count does not match data");

    const int n = data.n_samples();
    const int n_w = cs.n_walkers;
    const int d = cs.d;
    const int T = opts.iteration;
    const int burn = burn_count(opts);
    const int n_kept = kept_count(opts);
    const CounterRng rng(opts.seed);

    Posterior post{&data, &prot, &model, cs.bounds, d};
    LogDensityFn f = [&post](const Matrix& st, const std::vector<int>& ids) {
        return post.eval(st, ids);
    };

    std::vector<double> step_std(d);
    for (int p = 0; p < d; ++p) {
        double frac = 0.05;
        auto it = opts.xStepSize.find(cs.names[p]);
        if (it != opts.xStepSize.end()) frac = it->second;
        step_std[p] = frac * (cs.bounds[p].second - cs.bounds[p].first);
    }

    PosteriorSummary out;
    out.names = cs.names;
    out.mean = Matrix(n, d);
    out.stdev = Matrix(n, d);
    out.acceptance_rate.assign(n, 0.0);
    out.n_retained = n_kept;
    if (opts.keep_samples)
        out.retained.assign(d, Matrix(n, n_kept * n_w));

    RunningMoments mom(n, d);
    std::vector<double> accept_total(n, 0.0);

    auto init_states = [&](int s_begin, int s_count) {
        Matrix st(s_count * n_w, d);
        for (int si = 0; si < s_count; ++si) {
            int s = s_begin + si;
            for (int w = 0; w < n_w; ++w) {
                int c = si * n_w + w;
                for (int p = 0; p < d; ++p) {
                    double x = x0.find(cs.names[p]).values[s];
                    if (opts.algorithm == McmcAlgo::ensemble) {
                        double span = cs.bounds[p].second - cs.bounds[p].first;
                        x += 1e-3 * span * rng.normal(s, w, 0, p);
                        double eps = 1e-6 * span;
                        x = std::clamp(x, cs.bounds[p].first + eps, cs.bounds[p].second - eps);
                    }
                    st(c, p) = x;
                }
            }
        }
        return st;
    };

    auto run_block = [&](int s_begin, int s_count) {
        Matrix states = init_states(s_begin, s_count);
        const int k = states.rows;
        std::vector<int> sample_ids(k), walker_ids(k);
        for (int c = 0; c < k; ++c) {
            sample_ids[c] = s_begin + c / n_w;
            walker_ids[c] = c % n_w;
        }
        std::vector<double> logp = f(states, sample_ids);
        std::vector<uint8_t> accepted(k, 0);

        for (int t = 1; t <= T; ++t) {
            if (opts.algorithm == McmcAlgo::mh)
                mh_move(states, logp, f, step_std, sample_ids, walker_ids, rng,
                        static_cast<uint64_t>(t), &accepted);
            else
                stretch_move(states, logp, f, opts.StepSize, s_count, n_w, s_begin, rng,
                             static_cast<uint64_t>(t), &accepted);
            for (int c = 0; c < k; ++c) accept_total[sample_ids[c]] += accepted[c];

            if (t > burn && (t - burn) % opts.thinning == 0) {
                int kept_idx = (t - burn) / opts.thinning - 1;
                for (int c = 0; c < k; ++c) {
                    int s = sample_ids[c];
                    mom.add(s, states, c);
                    if (opts.keep_samples) {
                        for (int p = 0; p < d; ++p)
                            out.retained[p](s, kept_idx * n_w + walker_ids[c]) = states(c, p);
                    }
                }
            }
        }
    };

    if (scalar_reference) {
        for (int s = 0; s < n; ++s) run_block(s, 1);
    } else {
        run_block(0, n);
    }

    for (int s = 0; s < n; ++s) {
        out.acceptance_rate[s] = accept_total[s] / (static_cast<double>(T) * n_w);
        for (int p = 0; p < d; ++p) {
            out.mean(s, p) = mom.mean(s, p);
            out.stdev(s, p) =
                mom.count[s] > 1 ? std::sqrt(mom.m2(s, p) / (mom.count[s] - 1)) : 0.0;
        }
    }
    return out;
}

}  // namespace

PosteriorSummary mcmc_run(const ParamSet& x0, const MeasuredData& data, const Protocol& prot,
                          const Model& model, const McmcOptions& options) {
    return run_impl(x0, data, prot, model, options, false);
}

PosteriorSummary mcmc_run_scalar_reference(const ParamSet& x0, const MeasuredData& data,
                                           const Protocol& prot, const Model& model,
                                           const McmcOptions& options) {
    return run_impl(x0, data, prot, model, options, true);
}

}  // namespace qfit
