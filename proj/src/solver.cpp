#include "qfit/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace qfit {

namespace {
constexpr double kBoundMargin = 1e-6;  // relative to (ub - lb)
}

void SolverOptions::validate() const {
    if (!(initialLearnRate > 0.0)) throw ConfigError("solver: initialLearnRate must be > 0");
    if (iteration < 1) throw ConfigError("solver: iteration must be >= 1");
    if (convergenceWindow < 2) throw ConfigError("solver: convergenceWindow must be >= 2");
    for (const auto& r : regularizers) r.validate();
}

std::vector<double> to_unconstrained(const std::vector<double>& theta, double lb, double ub) {
    if (!(lb < ub)) throw ConfigError("bounds: lb must be < ub");
    double span = ub - lb;
    double eps = kBoundMargin * span;
    std::vector<double> z(theta.size());
    for (size_t i = 0; i < theta.size(); ++i) {
        double x = std::clamp(theta[i], lb + eps, ub - eps);
        double p = (x - lb) / span;
        z[i] = std::log(p / (1.0 - p));
    }
    return z;
}

std::vector<double> from_unconstrained(const std::vector<double>& z, double lb, double ub) {
    if (!(lb < ub)) throw ConfigError("bounds: lb must be < ub");
    double span = ub - lb;
    std::vector<double> theta(z.size());
    for (size_t i = 0; i < z.size(); ++i) {
        double s = z[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-z[i]))
                               : std::exp(z[i]) / (1.0 + std::exp(z[i]));
        theta[i] = lb + span * s;
    }
    return theta;
}

Var bound_transform(Tape& t, Var z, double lb, double ub) {
    if (!(lb < ub)) throw ConfigError("bounds: lb must be < ub");
    return add(mul(sigmoid(z), ub - lb), lb);
}

Var objective(Tape& t, const std::map<std::string, Var>& theta, const MeasuredData& data,
              const Protocol& prot, const Model& model, LossKind loss,
              const std::vector<Regularizer>& regs) {
    std::vector<Var> ordered;
    ordered.reserve(model.params.size());
    for (const auto& pd : model.params) {
        auto it = theta.find(pd.name);
        if (it == theta.end())
            throw ConfigError("objective: missing parameter '" + pd.name + "'");
        ordered.push_back(it->second);
    }
    Var pred = model.forward(t, ordered, prot);
    const Matrix& pv = t.value(pred);
    if (pv.rows != data.values.rows || pv.cols != data.values.cols)
        throw ShapeError("objective: model output shape does not match data");
    if (!all_finite(pv)) {
        std::ostringstream os;
        os << "objective: NaN/Inf in model output; parameter stats:";
        for (const auto& pd : model.params) {
            const Matrix& v = t.value(theta.at(pd.name));
            double lo = v.v[0], hi = v.v[0], s = 0.0;
            for (double x : v.v) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
                s += std::abs(x);
            }
            os << " " << pd.name << "[min=" << lo << ",max=" << hi
               << ",mean_abs=" << s / v.size() << "]";
        }
        throw NumericalError(os.str());
    }

    Var meas = t.lift(data.values, false);
    Var resid = sub(meas, pred);
    size_t n_active = data.values.size();
    if (!data.weights.empty()) {
        Var w = t.lift(data.weights, false);
        resid = mul(w, resid);
        n_active = 0;
        for (double x : data.weights.v) n_active += (x > 0.0);
    }
    if (n_active == 0) throw DataError("objective: no active (weighted) entries");

    Var data_term = (loss == LossKind::l1) ? sum_all(vabs(resid)) : sum_all(square(resid));
    Var total = mul(data_term, 1.0 / static_cast<double>(n_active));
    if (!regs.empty()) total = total + regularization_total(t, theta, regs);
    return total;
}

void adam_step(std::vector<double>& z, const std::vector<double>& grad, AdamState& st, double lr,
               int iter, double beta1, double beta2, double eps) {
    if (iter < 1) throw ConfigError("adam_step: iter must be >= 1");
    if (st.m.size() != z.size()) st.m.assign(z.size(), 0.0);
    if (st.v.size() != z.size()) st.v.assign(z.size(), 0.0);
    double bc1 = 1.0 - std::pow(beta1, iter);
    double bc2 = 1.0 - std::pow(beta2, iter);
    for (size_t i = 0; i < z.size(); ++i) {
        st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * grad[i];
        st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        double mhat = st.m[i] / bc1;
        double vhat = st.v[i] / bc2;
        z[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

void sgdm_step(std::vector<double>& z, const std::vector<double>& grad, SgdmState& st, double lr,
               double momentum) {
    if (st.v.size() != z.size()) st.v.assign(z.size(), 0.0);
    for (size_t i = 0; i < z.size(); ++i) {
        st.v[i] = momentum * st.v[i] + grad[i];
        z[i] -= lr * st.v[i];
    }
}

void rmsprop_step(std::vector<double>& z, const std::vector<double>& grad, RmspropState& st,
                  double lr, double rho, double eps) {
    if (st.s.size() != z.size()) st.s.assign(z.size(), 0.0);
    for (size_t i = 0; i < z.size(); ++i) {
        st.s[i] = rho * st.s[i] + (1.0 - rho) * grad[i] * grad[i];
        z[i] -= lr * grad[i] / (std::sqrt(st.s[i]) + eps);
    }
}

double trailing_slope(const std::vector<double>& y, int window) {
    int n = static_cast<int>(y.size());
    int w = std::min(window, n);
    if (w < 2) throw ConfigError("trailing_slope: need at least 2 points");
    const double* p = y.data() + (n - w);
    double xbar = (w - 1) / 2.0;
    double ybar = 0.0;
    for (int i = 0; i < w; ++i) ybar += p[i];
    ybar /= w;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < w; ++i) {
        num += (i - xbar) * (p[i] - ybar);
        den += (i - xbar) * (i - xbar);
    }
    return num / den;
}

std::optional<StopReason> check_stop(const std::vector<double>& loss_history,
                                     const SolverOptions& options) {
    if (loss_history.empty()) throw ConfigError("check_stop: empty history");
    if (loss_history.back() < options.tol) return StopReason::tol;
    if (static_cast<int>(loss_history.size()) >= options.iteration) return StopReason::max_iter;
    if (static_cast<int>(loss_history.size()) >= options.convergenceWindow) {
        double slope = trailing_slope(loss_history, options.convergenceWindow);
        if (std::abs(slope) < options.convergenceValue) return StopReason::converged;
    }
    return std::nullopt;
}

FitResult fit_gd(const ParamSet& x0, const MeasuredData& data, const Protocol& prot,
                 const Model& model, const SolverOptions& options) {
    options.validate();
    x0.validate();
    data.validate();
    model.check_protocol(prot);
    if (x0.n_samples() != data.n_samples())
        throw ShapeError("fit_gd: x0 sample count does not match data");

    const int n_params = static_cast<int>(model.params.size());
    std::vector<std::vector<double>> z(n_params);
    std::vector<std::pair<double, double>> bounds(n_params);
    for (int p = 0; p < n_params; ++p) {
        const auto& e = x0.find(model.params[p].name);
        bounds[p] = {e.lb, e.ub};
        z[p] = to_unconstrained(e.values, e.lb, e.ub);
    }

    std::vector<AdamState> adam(n_params);
    std::vector<SgdmState> sgdm(n_params);
    std::vector<RmspropState> rmsp(n_params);

    FitResult res;
    std::vector<std::vector<double>> best_z = z;
    double best_loss = std::numeric_limits<double>::infinity();

    for (int it = 1; it <= options.iteration; ++it) {
        Tape t;
        std::map<std::string, Var> theta;
        std::vector<Var> z_vars(n_params);
        for (int p = 0; p < n_params; ++p) {
            z_vars[p] = t.lift(Matrix::column(z[p]), true);
            theta[model.params[p].name] =
                bound_transform(t, z_vars[p], bounds[p].first, bounds[p].second);
        }
        Var L = objective(t, theta, data, prot, model, options.lossFunction,
                          options.regularizers);
        double loss = t.value(L)(0, 0);
        if (!std::isfinite(loss)) {
            res.stop_reason = StopReason::diverged;
            if (options.verbose)
                std::fprintf(stderr, "fit_gd: non-finite loss at iteration %d, "
                                     "returning best earlier iterate\n", it);
            break;
        }
        res.loss_history.push_back(loss);
        if (loss < best_loss) {
            best_loss = loss;
            best_z = z;
        }
        auto stop = check_stop(res.loss_history, options);
        if (stop) {
            res.stop_reason = *stop;
            break;
        }

        t.backward(L);
        for (int p = 0; p < n_params; ++p) {
            const Matrix& g = t.grad(z_vars[p]);
            switch (options.optimizer) {
                case OptimizerKind::adam:
                    adam_step(z[p], g.v, adam[p], options.initialLearnRate, it);
                    break;
                case OptimizerKind::sgdm:
                    sgdm_step(z[p], g.v, sgdm[p], options.initialLearnRate);
                    break;
                case OptimizerKind::rmsprop:
                    rmsprop_step(z[p], g.v, rmsp[p], options.initialLearnRate);
                    break;
            }
        }
    }

    res.iterations_run = static_cast<int>(res.loss_history.size());
    res.best_loss = best_loss;
    res.final.params.clear();
    for (int p = 0; p < n_params; ++p) {
        ParamSet::Entry e;
        e.name = model.params[p].name;
        e.lb = bounds[p].first;
        e.ub = bounds[p].second;
        e.values = from_unconstrained(best_z[p], e.lb, e.ub);
        res.final.params.push_back(std::move(e));
    }
    return res;
}

}  // namespace qfit
