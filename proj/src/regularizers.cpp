#include "qfit/regularizers.hpp"

namespace qfit {

namespace {
constexpr double kSmoothEps = 1e-12;
}

void Regularizer::validate() const {
    if (lambda < 0.0) throw ConfigError("regularizer: lambda must be >= 0");
    switch (kind) {
        case RegKind::tv_graph:
            if (target_params.empty()) throw ConfigError("tv_graph: no target parameters");
            graph.validate();
            break;
        case RegKind::prior:
            if (target_params.empty()) throw ConfigError("prior: no target parameters");
            if (mu.empty() || sigma.empty()) throw ConfigError("prior: mu and sigma required");
            if (mu.size() != sigma.size()) throw ConfigError("prior: mu/sigma size mismatch");
            for (double s : sigma)
                if (!(s > 0.0)) throw ConfigError("prior: sigma must be > 0");
            break;
        case RegKind::custom:
            if (!custom) throw ConfigError("custom regularizer: missing hook");
            break;
    }
}

Var tv_graph_term(Tape& t, Var field, const NeighborGraph& graph) {
    if (graph.edges.empty()) return t.lift_scalar(0.0);
    Var d = edge_diff(field, graph);
    Var s = sum_all(smooth_abs(d, kSmoothEps));
    return mul(s, 1.0 / static_cast<double>(graph.edges.size()));
}

Var prior_penalty_term(Tape& t, Var field, const std::vector<double>& mu,
                       const std::vector<double>& sigma) {
    int n = field.rows();
    auto expand = [n](const std::vector<double>& v, const char* what) {
        if (v.size() == 1) return Matrix(1, 1, v[0]);
        if (static_cast<int>(v.size()) != n)
            throw ShapeError(std::string(what) + ": size must be 1 or n_samples");
        return Matrix::column(v);
    };
    Var mu_v = t.lift(expand(mu, "prior mu"), false);
    Var sg_v = t.lift(expand(sigma, "prior sigma"), false);
    Var z = (field - mu_v) / sg_v;
    return mul(sum_all(smooth_abs(z, kSmoothEps)), 1.0 / static_cast<double>(n));
}

Var regularization_total(Tape& t, const std::map<std::string, Var>& theta,
                         const std::vector<Regularizer>& regs) {
    Var total = t.lift_scalar(0.0);
    for (const auto& reg : regs) {
        reg.validate();
        if (reg.lambda == 0.0) continue;
        Var term = t.lift_scalar(0.0);
        if (reg.kind == RegKind::custom) {
            Var h = reg.custom(t, theta);
            if (h.rows() != 1 || h.cols() != 1)
                throw ConfigError("custom regularizer: hook must return a scalar");
            term = h;
        } else {
            for (const auto& name : reg.target_params) {
                auto it = theta.find(name);
                if (it == theta.end())
                    throw ConfigError("regularizer: unknown target parameter '" + name + "'");
                if (reg.kind == RegKind::tv_graph)
                    term = term + tv_graph_term(t, it->second, reg.graph);
                else
                    term = term + prior_penalty_term(t, it->second, reg.mu, reg.sigma);
            }
        }
        total = total + mul(term, reg.lambda);
    }
    return total;
}

}  // namespace qfit
