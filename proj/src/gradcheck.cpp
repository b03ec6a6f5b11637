#include "qfit/gradcheck.hpp"

#include <cmath>

#include "qfit/rng.hpp"

namespace qfit {

namespace {

double rel_err(double ad, double fd) {
    return std::abs(ad - fd) / std::max(std::abs(fd), 1e-8);
}

}  // namespace

Protocol default_protocol(const std::string& model_name) {
    Protocol prot;
    Protocol::Axis ax;
    if (model_name == "monoexp" || model_name == "biexp") {
        ax.name = "TE_s";
        std::vector<double> te;
        for (int i = 1; i <= 8; ++i) te.push_back(0.005 * i);
        ax.values = Matrix::row(te);
    } else if (model_name == "smt_ballstick") {
        ax.name = "bval_ms_per_um2";
        ax.values = Matrix::row({0.0, 1e-6, 0.5, 1.0, 2.0, 3.0});
    } else if (model_name == "identity") {
        ax.name = "meas_index";
        std::vector<double> idx;
        for (int i = 0; i < 8; ++i) idx.push_back(i);
        ax.values = Matrix::row(idx);
    } else {
        throw ConfigError("default_protocol: unknown model '" + model_name + "'");
    }
    prot.axes.push_back(std::move(ax));
    return prot;
}

GradCheckResult gradcheck_model(const Model& model, const Protocol& prot, LossKind loss,
                                int n_points, uint64_t seed) {
    if (n_points < 1) throw ConfigError("gradcheck: n_points must be >= 1");
    model.check_protocol(prot);
    const int d = static_cast<int>(model.params.size());
    const int m = model.n_meas(prot);
    CounterRng rng{seed};

    // random in-bounds points, 5% away from the box edges
    std::vector<std::vector<double>> theta(d, std::vector<double>(n_points));
    for (int p = 0; p < d; ++p) {
        double lo = model.params[p].lb + 0.05 * (model.params[p].ub - model.params[p].lb);
        double hi = model.params[p].ub - 0.05 * (model.params[p].ub - model.params[p].lb);
        for (int s = 0; s < n_points; ++s)
            theta[p][s] = lo + (hi - lo) * rng.uniform(s, p, 0, 0);
    }

    // data offset from the prediction so L1 residuals sit away from the kink
    Matrix pred = model.predict(theta, prot);
    Matrix all_data(n_points, m);
    for (int s = 0; s < n_points; ++s)
        for (int j = 0; j < m; ++j) {
            double u = rng.uniform(s, 0, 1, j);
            double mag = 0.05 + 0.1 * u;
            all_data(s, j) = pred(s, j) + (rng.uniform(s, 1, 1, j) < 0.5 ? -mag : mag);
        }

    // each point is checked as its own single-sample objective; batching
    // would only rescale all gradients by 1/n and degrade the conditioning
    // of the finite-difference reference
    GradCheckResult res;
    for (int s = 0; s < n_points; ++s) {
        MeasuredData data;
        data.values = Matrix(1, m);
        for (int j = 0; j < m; ++j) data.values(0, j) = all_data(s, j);
        std::vector<double> point(d);
        for (int p = 0; p < d; ++p) point[p] = theta[p][s];

        auto eval = [&](const std::vector<double>& th) {
            Tape t;
            std::map<std::string, Var> vars;
            for (int p = 0; p < d; ++p)
                vars[model.params[p].name] = t.lift(Matrix(1, 1, th[p]), false);
            Var L = objective(t, vars, data, prot, model, loss, {});
            return t.value(L)(0, 0);
        };

        Tape t;
        std::map<std::string, Var> vars;
        std::vector<Var> leaves(d);
        for (int p = 0; p < d; ++p) {
            leaves[p] = t.lift(Matrix(1, 1, point[p]), true);
            vars[model.params[p].name] = leaves[p];
        }
        Var L = objective(t, vars, data, prot, model, loss, {});
        t.backward(L);

        for (int p = 0; p < d; ++p) {
            double h = 1e-6 * (1.0 + std::abs(point[p]));
            auto tp = point, tm = point;
            tp[p] += h;
            tm[p] -= h;
            double fd = (eval(tp) - eval(tm)) / (2.0 * h);
            res.max_rel_err = std::max(res.max_rel_err, rel_err(t.grad(leaves[p]).v[0], fd));
            ++res.n_checked;
        }
    }
    return res;
}

GradCheckResult gradcheck_regularizer(RegKind kind, int n_points, uint64_t seed) {
    if (n_points < 2) throw ConfigError("gradcheck: n_points must be >= 2");
    CounterRng rng{seed};

    // zigzag with steps >= 0.01 keeps TV edge differences and prior
    // deviations away from the smooth_abs corner; alternating signs keep
    // every TV gradient coordinate nonzero so the finite-difference
    // reference is well conditioned
    std::vector<double> field(n_points);
    double acc = 0.0;
    for (int s = 0; s < n_points; ++s) {
        double u = rng.uniform(s, 0, 0, 0);
        acc += (0.01 + 0.5 * u) * (s % 2 == 0 ? 1.0 : -1.0);
        field[s] = acc;
    }

    std::vector<std::pair<int, int>> chain;
    for (int s = 0; s + 1 < n_points; ++s) chain.emplace_back(s, s + 1);
    NeighborGraph graph = mesh_graph_edges(n_points, chain);

    std::vector<double> mu(n_points), sigma(n_points);
    for (int s = 0; s < n_points; ++s) {
        double off = 0.05 + rng.uniform(s, 2, 0, 0);
        mu[s] = field[s] + (rng.uniform(s, 3, 0, 0) < 0.5 ? -off : off);
        sigma[s] = 0.5 + rng.uniform(s, 4, 0, 0);
    }

    auto term = [&](Tape& t, Var x) {
        switch (kind) {
            case RegKind::tv_graph:
                return tv_graph_term(t, x, graph);
            case RegKind::prior:
                return prior_penalty_term(t, x, mu, sigma);
            default:
                throw ConfigError("gradcheck: unsupported regularizer kind");
        }
    };
    auto eval = [&](const std::vector<double>& f) {
        Tape t;
        Var x = t.lift(Matrix::column(f), false);
        return t.value(term(t, x))(0, 0);
    };

    Tape t;
    Var x = t.lift(Matrix::column(field), true);
    Var L = term(t, x);
    t.backward(L);
    const Matrix& g = t.grad(x);

    GradCheckResult res;
    for (int s = 0; s < n_points; ++s) {
        double h = 1e-6 * (1.0 + std::abs(field[s]));
        auto fp = field, fm = field;
        fp[s] += h;
        fm[s] -= h;
        double fd = (eval(fp) - eval(fm)) / (2.0 * h);
        res.max_rel_err = std::max(res.max_rel_err, rel_err(g.v[s], fd));
        ++res.n_checked;
    }
    return res;
}

}  // namespace qfit
