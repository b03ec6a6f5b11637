#include "qfit/model.hpp"

#include <cmath>
#include <map>

namespace qfit {

int Model::n_meas(const Protocol& prot) const {
    if (protocol_axes.empty()) throw ConfigError("Model: no protocol axes declared");
    return prot.axis(protocol_axes[0]).cols;
}

void Model::check_protocol(const Protocol& prot) const {
    for (const auto& ax : protocol_axes)
        if (!prot.has(ax))
            throw ConfigError("Model '" + name + "': protocol missing axis '" + ax + "'");
}

Matrix Model::predict(const std::vector<std::vector<double>>& fields, const Protocol& prot) const {
    if (fields.size() != params.size())
        throw ShapeError("Model::predict: wrong number of parameter fields");
    Tape t;
    std::vector<Var> vars;
    vars.reserve(fields.size());
    for (const auto& f : fields) vars.push_back(t.lift(Matrix::column(f), false));
    Var out = forward(t, vars, prot);
    return t.value(out);
}

Var lift_axis(Tape& t, const Protocol& prot, const std::string& name) {
    return t.lift(prot.axis(name), false);
}

namespace {

Var monoexp_forward(Tape& t, const std::vector<Var>& p, const Protocol& prot) {
    Var te = lift_axis(t, prot, "TE_s");
    Var s0 = p[0], r2s = p[1];
    return s0 * vexp(neg(te * r2s));
}

Var biexp_forward(Tape& t, const std::vector<Var>& p, const Protocol& prot) {
    Var te = lift_axis(t, prot, "TE_s");
    return p[0] * vexp(neg(te * p[1])) + p[2] * vexp(neg(te * p[3]));
}

// Spherical-mean stick + isotropic ball. Columns with b below 1e-5 use a
// 3-term series for sqrt(pi/(4x))*erf(sqrt(x)) to avoid 0/0 at b = 0; the
// switch depends on the (constant) protocol only, so gradients stay exact.
Var smt_ballstick_forward(Tape& t, const std::vector<Var>& p, const Protocol& prot) {
    const Matrix& bm = prot.axis("bval_ms_per_um2");
    Matrix guard(bm.rows, bm.cols);
    for (size_t i = 0; i < bm.size(); ++i) {
        if (bm.v[i] < 0.0) throw DataError("smt_ballstick: negative b-value");
        guard.v[i] = bm.v[i] < 1e-5 ? 1.0 : 0.0;
    }
    Var b = t.lift(bm, false);
    Var w0 = t.lift(guard, false);
    Var f = p[0], da = p[1], diso = p[2];

    Var x = b * da;  // dimensionless
    Var series = 1.0 - x * (1.0 / 3.0) + square(x) * (1.0 / 10.0);
    Var x_safe = x + w0;  // = 1 on guarded columns, keeps sqrt/div well-posed
    Var sqrt_x = vsqrt(x_safe);
    Var exact = mul(verf(sqrt_x) / sqrt_x, std::sqrt(M_PI) / 2.0);
    Var stick = w0 * series + (1.0 - w0) * exact;
    Var ball = vexp(neg(b * diso));
    return f * stick + (1.0 - f) * ball;
}

Var identity_forward(Tape& t, const std::vector<Var>& p, const Protocol& prot) {
    int m = prot.axis("meas_index").cols;
    return broadcast_meas(p[0], m);
}

const std::map<std::string, Model>& registry() {
    static const std::map<std::string, Model> models = [] {
        std::map<std::string, Model> r;
        r["monoexp"] = Model{
            "monoexp",
            {{"S0", 0.0, 5.0, 2.0}, {"R2star", 0.0, 50.0, 20.0}},
            {"TE_s"},
            monoexp_forward,
        };
        r["biexp"] = Model{
            "biexp",
            {{"A1", 0.0, 5.0, 0.5},
             {"R2_1", 1.0, 300.0, 100.0},
             {"A2", 0.0, 5.0, 1.0},
             {"R2_2", 1.0, 300.0, 20.0}},
            {"TE_s"},
            biexp_forward,
        };
        r["smt_ballstick"] = Model{
            "smt_ballstick",
            {{"f", 0.0, 1.0, 0.5}, {"Da", 0.1, 3.0, 1.5}, {"Diso", 0.1, 3.0, 1.5}},
            {"bval_ms_per_um2"},
            smt_ballstick_forward,
        };
        r["identity"] = Model{
            "identity",
            {{"theta", -1000.0, 1000.0, 0.0}},
            {"meas_index"},
            identity_forward,
        };
        return r;
    }();
    return models;
}

}  // namespace

const Model& get_model(const std::string& name) {
    const auto& r = registry();
    auto it = r.find(name);
    if (it == r.end()) throw ConfigError("unknown model '" + name + "'");
    return it->second;
}

std::vector<std::string> model_names() {
    std::vector<std::string> out;
    for (const auto& [k, v] : registry()) out.push_back(k);
    return out;
}

}  // namespace qfit
