#include "qfit/nlls.hpp"

#include <algorithm>
#include <cmath>

#include "qfit/parallel.hpp"
#include "qfit/rng.hpp"

namespace qfit {

namespace {

Protocol protocol_row(const Protocol& prot, int sample) {
    Protocol out;
    for (const auto& ax : prot.axes) {
        Protocol::Axis a;
        a.name = ax.name;
        if (ax.values.rows == 1) {
            a.values = ax.values;
        } else {
            a.values = Matrix(1, ax.values.cols);
            for (int j = 0; j < ax.values.cols; ++j) a.values(0, j) = ax.values(sample, j);
        }
        out.axes.push_back(std::move(a));
    }
    return out;
}

struct SampleProblem {
    const Model* model;
    const Protocol* prot;  // single-row
    std::vector<double> meas, w;
    std::vector<std::pair<double, double>> bounds;

    std::vector<double> residual(const std::vector<double>& theta) const {
        std::vector<std::vector<double>> fields(theta.size());
        for (size_t p = 0; p < theta.size(); ++p) fields[p] = {theta[p]};
        Matrix pred = model->predict(fields, *prot);
        std::vector<double> r(meas.size());
        for (size_t j = 0; j < meas.size(); ++j) r[j] = w[j] * (meas[j] - pred.v[j]);
        return r;
    }

    static double ssq(const std::vector<double>& r) {
        double s = 0.0;
        for (double v : r) s += v * v;
        return s;
    }
};

bool lm_solve(const SampleProblem& pr, std::vector<double>& theta, double& cost,
              const NllsOptions& opt) {
    const int d = static_cast<int>(theta.size());
    const int m = static_cast<int>(pr.meas.size());
    std::vector<double> r = pr.residual(theta);
    cost = SampleProblem::ssq(r);
    double lambda = 1e-3;

    for (int it = 0; it < opt.max_iter; ++it) {
        // central-difference Jacobian of the residual
        std::vector<double> J(static_cast<size_t>(m) * d);
        for (int p = 0; p < d; ++p) {
            double span = pr.bounds[p].second - pr.bounds[p].first;
            double h = 1e-6 * span;
            std::vector<double> tp = theta, tm = theta;
            tp[p] = std::min(theta[p] + h, pr.bounds[p].second);
            tm[p] = std::max(theta[p] - h, pr.bounds[p].first);
            double dx = tp[p] - tm[p];
            std::vector<double> rp = pr.residual(tp), rm = pr.residual(tm);
            for (int j = 0; j < m; ++j)
                J[static_cast<size_t>(j) * d + p] = dx > 0.0 ? (rp[j] - rm[j]) / dx : 0.0;
        }

        // normal equations JtJ + lambda*diag(JtJ), Jtr
        std::vector<double> jtj(static_cast<size_t>(d) * d, 0.0), jtr(d, 0.0);
        for (int j = 0; j < m; ++j)
            for (int p = 0; p < d; ++p) {
                double jp = J[static_cast<size_t>(j) * d + p];
                jtr[p] += jp * r[j];
                for (int q = p; q < d; ++q)
                    jtj[static_cast<size_t>(p) * d + q] += jp * J[static_cast<size_t>(j) * d + q];
            }
        for (int p = 0; p < d; ++p)
            for (int q = 0; q < p; ++q)
                jtj[static_cast<size_t>(p) * d + q] = jtj[static_cast<size_t>(q) * d + p];

        bool improved = false;
        for (int tries = 0; tries < 12 && !improved; ++tries) {
            // Cholesky of JtJ + lambda*diag
            std::vector<double> a = jtj;
            for (int p = 0; p < d; ++p) {
                double dg = jtj[static_cast<size_t>(p) * d + p];
                a[static_cast<size_t>(p) * d + p] = dg + lambda * std::max(dg, 1e-12);
            }
            std::vector<double> L(static_cast<size_t>(d) * d, 0.0);
            bool ok = true;
            for (int p = 0; p < d && ok; ++p)
                for (int q = 0; q <= p; ++q) {
                    double s = a[static_cast<size_t>(p) * d + q];
                    for (int k = 0; k < q; ++k)
                        s -= L[static_cast<size_t>(p) * d + k] * L[static_cast<size_t>(q) * d + k];
                    if (p == q) {
                        if (s <= 0.0) { ok = false; break; }
                        L[static_cast<size_t>(p) * d + q] = std::sqrt(s);
                    } else {
                        L[static_cast<size_t>(p) * d + q] = s / L[static_cast<size_t>(q) * d + q];
                    }
                }
            if (!ok) {
                lambda *= 10.0;
                continue;
            }
            // solve L L^T step = jtr (step is the Gauss-Newton direction on
            // r = meas - pred, so theta moves by +step)
            std::vector<double> y(d), step(d);
            for (int p = 0; p < d; ++p) {
                double s = jtr[p];
                for (int k = 0; k < p; ++k) s -= L[static_cast<size_t>(p) * d + k] * y[k];
                y[p] = s / L[static_cast<size_t>(p) * d + p];
            }
            for (int p = d - 1; p >= 0; --p) {
                double s = y[p];
                for (int k = p + 1; k < d; ++k) s -= L[static_cast<size_t>(k) * d + p] * step[k];
                step[p] = s / L[static_cast<size_t>(p) * d + p];
            }

            std::vector<double> trial(d);
            double max_rel_step = 0.0;
            for (int p = 0; p < d; ++p) {
                double span = pr.bounds[p].second - pr.bounds[p].first;
                trial[p] = std::clamp(theta[p] - step[p], pr.bounds[p].first, pr.bounds[p].second);
                max_rel_step = std::max(max_rel_step, std::abs(trial[p] - theta[p]) / span);
            }
            std::vector<double> rt = pr.residual(trial);
            double ct = SampleProblem::ssq(rt);
            if (ct < cost) {
                double rel_drop = (cost - ct) / std::max(cost, 1e-300);
                theta = trial;
                r = std::move(rt);
                cost = ct;
                lambda = std::max(lambda * 0.3, 1e-12);
                improved = true;
                if (rel_drop < opt.ftol || max_rel_step < opt.xtol) return true;
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved) return cost < 1e-20 || it > 0;
    }
    return false;
}

}  // namespace

NllsResult nlls_fit(const ParamSet& x0, const MeasuredData& data, const Protocol& prot,
                    const Model& model, const NllsOptions& options) {
    x0.validate();
    data.validate();
    model.check_protocol(prot);
    if (x0.n_samples() != data.n_samples())
        throw ShapeError("nlls_fit: x0 sample count does not match data");
    if (options.max_iter < 1 || options.multi_starts < 1)
        throw ConfigError("nlls_fit: max_iter and multi_starts must be >= 1");

    const int n = data.n_samples();
    const int m = data.n_meas();
    const int d = static_cast<int>(model.params.size());

    NllsResult res;
    res.cost.assign(n, 0.0);
    res.converged.assign(n, 0);
    for (int p = 0; p < d; ++p) {
        ParamSet::Entry e;
        const auto& src = x0.find(model.params[p].name);
        e.name = src.name;
        e.lb = src.lb;
        e.ub = src.ub;
        e.values.assign(n, 0.0);
        res.final.params.push_back(std::move(e));
    }

    CounterRng rng{options.seed};
    const double eps_rel = 1e-6;

    parallel_for(static_cast<size_t>(n), [&](size_t lo, size_t hi) {
        for (size_t s = lo; s < hi; ++s) {
            int si = static_cast<int>(s);
            SampleProblem pr;
            pr.model = &model;
            Protocol prow = protocol_row(prot, si);
            pr.prot = &prow;
            pr.meas.resize(m);
            pr.w.assign(m, 1.0);
            for (int j = 0; j < m; ++j) {
                pr.meas[j] = data.values(si, j);
                if (!data.weights.empty()) pr.w[j] = data.weights(si, j);
            }
            pr.bounds.resize(d);
            std::vector<double> start0(d);
            for (int p = 0; p < d; ++p) {
                const auto& e = x0.find(model.params[p].name);
                double margin = eps_rel * (e.ub - e.lb);
                pr.bounds[p] = {e.lb + margin, e.ub - margin};
                start0[p] = std::clamp(e.values[s], pr.bounds[p].first, pr.bounds[p].second);
            }

            double best_cost = 0.0;
            std::vector<double> best_theta;
            bool best_conv = false;
            for (int k = 0; k < options.multi_starts; ++k) {
                std::vector<double> theta(d);
                if (k == 0) {
                    theta = start0;
                } else {
                    for (int p = 0; p < d; ++p) {
                        double u = rng.uniform(s, static_cast<uint64_t>(k), 0,
                                               static_cast<uint64_t>(p));
                        theta[p] = pr.bounds[p].first +
                                   u * (pr.bounds[p].second - pr.bounds[p].first);
                    }
                }
                double cost = 0.0;
                bool conv = lm_solve(pr, theta, cost, options);
                if (best_theta.empty() || cost < best_cost) {
                    best_cost = cost;
                    best_theta = theta;
                    best_conv = conv;
                }
            }
            for (int p = 0; p < d; ++p) res.final.params[p].values[s] = best_theta[p];
            res.cost[s] = best_cost;
            res.converged[s] = best_conv ? 1 : 0;
        }
    });
    return res;
}

}  // namespace qfit
