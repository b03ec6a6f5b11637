#include "qfit/tape.hpp"

#include <cmath>
#include <utility>

#include "qfit/parallel.hpp"

namespace qfit {

namespace {

constexpr double kDivClamp = 1e-30;

enum BinaryKind { kAdd = 0, kSub, kMul, kDiv };
enum UnaryKind {
    kNeg = 0,
    kExp,
    kLog,
    kSqrt,
    kSquare,
    kPow,
    kErf,
    kAbs,
    kSmoothAbs,
    kSigmoid,
    kAddConst,
    kSubFromConst,
    kMulConst,
};

inline double clamp_den(double d) {
    if (std::abs(d) >= kDivClamp) return d;
    return d >= 0.0 ? kDivClamp : -kDivClamp;
}

inline double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

// Index helper for broadcasting: a dim of 1 is stretched.
struct Bcast {
    int rows, cols;
    int ri, ci;  // 0 if that dim is broadcast
    Bcast(const Matrix& m, int out_r, int out_c)
        : rows(m.rows), cols(m.cols), ri(m.rows == out_r ? 1 : 0), ci(m.cols == out_c ? 1 : 0) {}
    size_t idx(int i, int j) const { return static_cast<size_t>(i * ri) * cols + j * ci; }
};

void check_broadcast(const Matrix& a, const Matrix& b, const char* what) {
    bool r_ok = a.rows == b.rows || a.rows == 1 || b.rows == 1;
    bool c_ok = a.cols == b.cols || a.cols == 1 || b.cols == 1;
    if (!r_ok || !c_ok)
        throw ShapeError(std::string(what) + ": shapes (" + std::to_string(a.rows) + "," +
                         std::to_string(a.cols) + ") and (" + std::to_string(b.rows) + "," +
                         std::to_string(b.cols) + ") are not broadcastable");
}

}  // namespace

int Var::rows() const { return tape->value(*this).rows; }
int Var::cols() const { return tape->value(*this).cols; }

Var Tape::record(Matrix value, bool req, std::function<void(Tape&)> back) {
    Node n;
    n.val = std::move(value);
    n.req = req;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::lift(Matrix value, bool requires_grad) {
    if (!all_finite(value)) throw DomainError("lift: non-finite input");
    return record(std::move(value), requires_grad, nullptr);
}

const Matrix& Tape::value(Var x) const { return nodes_.at(x.id).val; }

bool Tape::requires_grad(Var x) const { return nodes_.at(x.id).req; }

Matrix& Tape::grad_buffer(int id) {
    Node& n = nodes_[id];
    if (n.grad.rows != n.val.rows || n.grad.cols != n.val.cols)
        n.grad = Matrix(n.val.rows, n.val.cols, 0.0);
    return n.grad;
}

void Tape::accumulate(int id, int i, int j, double g) { grad_buffer(id)(i, j) += g; }

void Tape::backward(Var root) {
    if (root.tape != this) throw ConfigError("backward: root from another tape");
    const Matrix& rv = value(root);
    if (rv.rows != 1 || rv.cols != 1) throw ShapeError("backward: root must be scalar (1x1)");

    for (size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].req) {
            Matrix& g = grad_buffer(static_cast<int>(i));
            std::fill(g.v.begin(), g.v.end(), 0.0);
        }
    }
    if (!nodes_[root.id].req) return;  // constant root, nothing flows
    grad_buffer(root.id)(0, 0) = 1.0;
    for (int i = root.id; i >= 0; --i) {
        if (nodes_[i].req && nodes_[i].back) nodes_[i].back(*this);
    }
}

const Matrix& Tape::grad(Var x) const {
    const Node& n = nodes_.at(x.id);
    if (!n.req || n.grad.rows != n.val.rows || n.grad.cols != n.val.cols)
        throw ConfigError("grad: node has no gradient");
    return n.grad;
}

bool Tape::has_grad(Var x) const {
    const Node& n = nodes_.at(x.id);
    return n.req && n.grad.rows == n.val.rows && n.grad.cols == n.val.cols;
}

void Tape::clear() { nodes_.clear(); }

Var binary_op_impl(Var a, Var b, int kind) {
    if (a.tape != b.tape) throw ConfigError("binary op: operands from different tapes");
    Tape& t = *a.tape;
    const Matrix& av = t.value(a);
    const Matrix& bv = t.value(b);
    check_broadcast(av, bv, "binary op");
    int R = std::max(av.rows, bv.rows);
    int C = std::max(av.cols, bv.cols);
    Matrix out(R, C);
    Bcast ba(av, R, C), bb(bv, R, C);

    parallel_for(static_cast<size_t>(R), [&](size_t i0, size_t i1) {
        for (size_t i = i0; i < i1; ++i) {
            for (int j = 0; j < C; ++j) {
                double x = av.v[ba.idx(static_cast<int>(i), j)];
                double y = bv.v[bb.idx(static_cast<int>(i), j)];
                double r;
                switch (kind) {
                    case kAdd: r = x + y; break;
                    case kSub: r = x - y; break;
                    case kMul: r = x * y; break;
                    default: r = x / clamp_den(y); break;
                }
                out.v[i * C + j] = r;
            }
        }
    });

    bool req = t.requires_grad(a) || t.requires_grad(b);
    int aid = a.id, bid = b.id;
    Var outv = t.record(std::move(out), req, nullptr);
    if (req) {
        int oid = outv.id;
        t.nodes_[oid].back = [aid, bid, oid, kind, R, C](Tape& tp) {
            const Matrix& g = tp.nodes_[oid].grad;
            const Matrix& av2 = tp.nodes_[aid].val;
            const Matrix& bv2 = tp.nodes_[bid].val;
            Bcast ba2(av2, R, C), bb2(bv2, R, C);
            bool a_req = tp.nodes_[aid].req;
            bool b_req = tp.nodes_[bid].req;
            Matrix* ga = a_req ? &tp.grad_buffer(aid) : nullptr;
            Matrix* gb = b_req ? &tp.grad_buffer(bid) : nullptr;
            bool a_same = a_req && av2.rows == R && av2.cols == C;
            bool b_same = b_req && bv2.rows == R && bv2.cols == C;
            auto body = [&](size_t i0, size_t i1) {
                for (size_t i = i0; i < i1; ++i) {
                    for (int j = 0; j < C; ++j) {
                        double gg = g.v[i * C + j];
                        if (gg == 0.0) continue;
                        double x = av2.v[ba2.idx(static_cast<int>(i), j)];
                        double y = bv2.v[bb2.idx(static_cast<int>(i), j)];
                        double da = 0, db = 0;
                        switch (kind) {
                            case kAdd: da = gg; db = gg; break;
                            case kSub: da = gg; db = -gg; break;
                            case kMul: da = gg * y; db = gg * x; break;
                            default: {
                                double dc = clamp_den(y);
                                da = gg / dc;
                                db = (std::abs(y) >= kDivClamp) ? -gg * x / (dc * dc) : 0.0;
                                break;
                            }
                        }
                        if (ga) ga->v[ba2.idx(static_cast<int>(i), j)] += da;
                        if (gb) gb->v[bb2.idx(static_cast<int>(i), j)] += db;
                    }
                }
            };
            // Broadcast accumulation is a reduction: run it serially so the
            // summation order never depends on thread count.
            if (a_same && b_same)
                parallel_for(static_cast<size_t>(R), body);
            else
                body(0, static_cast<size_t>(R));
        };
    }
    return outv;
}

Var unary_op_impl(Var a, int kind, double c) {
    Tape& t = *a.tape;
    const Matrix& av = t.value(a);
    Matrix out(av.rows, av.cols);
    const size_t n = av.size();

    // Forward value; domain checks are serial-fail-fast.
    if (kind == kLog || kind == kSqrt) {
        for (size_t i = 0; i < n; ++i)
            if (av.v[i] < 0.0)
                throw DomainError(kind == kLog ? "log of negative value" : "sqrt of negative value");
    }
    parallel_for(n, [&](size_t i0, size_t i1) {
        for (size_t i = i0; i < i1; ++i) {
            double x = av.v[i];
            double r;
            switch (kind) {
                case kNeg: r = -x; break;
                case kExp: r = std::exp(x); break;
                case kLog: r = std::log(x); break;
                case kSqrt: r = std::sqrt(x); break;
                case kSquare: r = x * x; break;
                case kPow: r = std::pow(x, c); break;
                case kErf: r = std::erf(x); break;
                case kAbs: r = std::abs(x); break;
                case kSmoothAbs: r = std::sqrt(x * x + c * c); break;
                case kSigmoid: r = stable_sigmoid(x); break;
                case kAddConst: r = x + c; break;
                case kSubFromConst: r = c - x; break;
                default: r = x * c; break;  // kMulConst
            }
            out.v[i] = r;
        }
    });

    bool req = t.requires_grad(a);
    Var outv = t.record(std::move(out), req, nullptr);
    if (req) {
        int aid = a.id, oid = outv.id;
        t.nodes_[oid].back = [aid, oid, kind, c](Tape& tp) {
            const Matrix& g = tp.nodes_[oid].grad;
            const Matrix& ov = tp.nodes_[oid].val;
            const Matrix& av2 = tp.nodes_[aid].val;
            Matrix& ga = tp.grad_buffer(aid);
            parallel_for(g.size(), [&](size_t i0, size_t i1) {
                for (size_t i = i0; i < i1; ++i) {
                    double gg = g.v[i];
                    if (gg == 0.0) continue;
                    double x = av2.v[i];
                    double o = ov.v[i];
                    double d;
                    switch (kind) {
                        case kNeg: d = -1.0; break;
                        case kExp: d = o; break;
                        case kLog: d = 1.0 / x; break;
                        case kSqrt: d = 0.5 / o; break;
                        case kSquare: d = 2.0 * x; break;
                        case kPow: d = c * std::pow(x, c - 1.0); break;
                        case kErf: d = 2.0 / std::sqrt(M_PI) * std::exp(-x * x); break;
                        case kAbs: d = (x > 0.0) ? 1.0 : (x < 0.0 ? -1.0 : 0.0); break;
                        case kSmoothAbs: d = x / o; break;
                        case kSigmoid: d = o * (1.0 - o); break;
                        case kAddConst: d = 1.0; break;
                        case kSubFromConst: d = -1.0; break;
                        default: d = c; break;  // kMulConst
                    }
                    ga.v[i] += gg * d;
                }
            });
        };
    }
    return outv;
}

Var add(Var a, Var b) { return binary_op_impl(a, b, kAdd); }
Var sub(Var a, Var b) { return binary_op_impl(a, b, kSub); }
Var mul(Var a, Var b) { return binary_op_impl(a, b, kMul); }
Var div(Var a, Var b) { return binary_op_impl(a, b, kDiv); }

Var add(Var a, double c) { return unary_op_impl(a, kAddConst, c); }
Var sub(Var a, double c) { return unary_op_impl(a, kAddConst, -c); }
Var sub(double c, Var a) { return unary_op_impl(a, kSubFromConst, c); }
Var mul(Var a, double c) { return unary_op_impl(a, kMulConst, c); }

Var neg(Var a) { return unary_op_impl(a, kNeg, 0); }
Var vexp(Var a) { return unary_op_impl(a, kExp, 0); }
Var vlog(Var a) { return unary_op_impl(a, kLog, 0); }
Var vsqrt(Var a) { return unary_op_impl(a, kSqrt, 0); }
Var square(Var a) { return unary_op_impl(a, kSquare, 0); }
Var pow_const(Var a, double p) { return unary_op_impl(a, kPow, p); }
Var verf(Var a) { return unary_op_impl(a, kErf, 0); }
Var vabs(Var a) { return unary_op_impl(a, kAbs, 0); }
Var smooth_abs(Var a, double eps) { return unary_op_impl(a, kSmoothAbs, eps); }
Var sigmoid(Var a) { return unary_op_impl(a, kSigmoid, 0); }

Var sum_all(Var a) {
    Tape& t = *a.tape;
    const Matrix& av = t.value(a);
    Matrix out(1, 1, pairwise_sum(av.v.data(), av.size()));
    bool req = t.requires_grad(a);
    Var outv = t.record(std::move(out), req, nullptr);
    if (req) {
        int aid = a.id, oid = outv.id;
        t.nodes_[oid].back = [aid, oid](Tape& tp) {
            double gg = tp.nodes_[oid].grad(0, 0);
            if (gg == 0.0) return;
            Matrix& ga = tp.grad_buffer(aid);
            parallel_for(ga.size(), [&](size_t i0, size_t i1) {
                for (size_t i = i0; i < i1; ++i) ga.v[i] += gg;
            });
        };
    }
    return outv;
}

Var sum_over_meas(Var a) {
    Tape& t = *a.tape;
    const Matrix& av = t.value(a);
    Matrix out(av.rows, 1);
    int C = av.cols;
    parallel_for(static_cast<size_t>(av.rows), [&](size_t i0, size_t i1) {
        for (size_t i = i0; i < i1; ++i)
            out.v[i] = pairwise_sum(av.v.data() + i * C, static_cast<size_t>(C));
    });
    bool req = t.requires_grad(a);
    Var outv = t.record(std::move(out), req, nullptr);
    if (req) {
        int aid = a.id, oid = outv.id;
        t.nodes_[oid].back = [aid, oid, C](Tape& tp) {
            const Matrix& g = tp.nodes_[oid].grad;
            Matrix& ga = tp.grad_buffer(aid);
            parallel_for(static_cast<size_t>(g.rows), [&](size_t i0, size_t i1) {
                for (size_t i = i0; i < i1; ++i) {
                    double gg = g.v[i];
                    if (gg == 0.0) continue;
                    for (int j = 0; j < C; ++j) ga.v[i * C + j] += gg;
                }
            });
        };
    }
    return outv;
}

Var broadcast_meas(Var a, int n_meas) {
    Tape& t = *a.tape;
    const Matrix& av = t.value(a);
    if (av.cols != 1) throw ShapeError("broadcast_meas: input must be a column");
    if (n_meas < 1) throw ShapeError("broadcast_meas: n_meas must be >= 1");
    Matrix out(av.rows, n_meas);
    parallel_for(static_cast<size_t>(av.rows), [&](size_t i0, size_t i1) {
        for (size_t i = i0; i < i1; ++i)
            for (int j = 0; j < n_meas; ++j) out.v[i * n_meas + j] = av.v[i];
    });
    bool req = t.requires_grad(a);
    Var outv = t.record(std::move(out), req, nullptr);
    if (req) {
        int aid = a.id, oid = outv.id;
        t.nodes_[oid].back = [aid, oid, n_meas](Tape& tp) {
            const Matrix& g = tp.nodes_[oid].grad;
            Matrix& ga = tp.grad_buffer(aid);
            parallel_for(static_cast<size_t>(g.rows), [&](size_t i0, size_t i1) {
                for (size_t i = i0; i < i1; ++i)
                    ga.v[i] += pairwise_sum(g.v.data() + i * n_meas, static_cast<size_t>(n_meas));
            });
        };
    }
    return outv;
}

Var apply_linear(Var a, const LinearMap& map) {
    Tape& t = *a.tape;
    Matrix out = map.apply(t.value(a));
    bool req = t.requires_grad(a);
    Var outv = t.record(std::move(out), req, nullptr);
    if (req) {
        int aid = a.id, oid = outv.id;
        // The map is captured by value so the tape owns its lifetime.
        LinearMap m = map;
        t.nodes_[oid].back = [aid, oid, m](Tape& tp) {
            Matrix gi = m.adjoint(tp.nodes_[oid].grad);
            Matrix& ga = tp.grad_buffer(aid);
            if (!gi.same_shape(ga)) throw ShapeError("apply_linear: adjoint shape mismatch");
            for (size_t i = 0; i < gi.size(); ++i) ga.v[i] += gi.v[i];
        };
    }
    return outv;
}

Var edge_diff(Var field, const NeighborGraph& graph) {
    Tape& t = *field.tape;
    const Matrix& fv = t.value(field);
    if (fv.cols != 1 || fv.rows != graph.n_nodes)
        throw ShapeError("edge_diff: field length must equal graph node count");
    int E = static_cast<int>(graph.edges.size());
    Matrix out(E, 1);
    for (int e = 0; e < E; ++e)
        out.v[e] = fv.v[graph.edges[e].first] - fv.v[graph.edges[e].second];
    bool req = t.requires_grad(field);
    Var outv = t.record(std::move(out), req, nullptr);
    if (req) {
        int aid = field.id, oid = outv.id;
        std::vector<std::pair<int, int>> edges = graph.edges;
        t.nodes_[oid].back = [aid, oid, edges](Tape& tp) {
            const Matrix& g = tp.nodes_[oid].grad;
            Matrix& ga = tp.grad_buffer(aid);
            for (size_t e = 0; e < edges.size(); ++e) {
                double gg = g.v[e];
                if (gg == 0.0) continue;
                ga.v[edges[e].first] += gg;
                ga.v[edges[e].second] -= gg;
            }
        };
    }
    return outv;
}

Var hconcat(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("hconcat: no parts");
    Tape& t = *parts[0].tape;
    int R = t.value(parts[0]).rows;
    int C = 0;
    bool req = false;
    for (Var p : parts) {
        if (p.tape != &t) throw ConfigError("hconcat: parts from different tapes");
        if (t.value(p).rows != R) throw ShapeError("hconcat: row count mismatch");
        C += t.value(p).cols;
        req = req || t.requires_grad(p);
    }
    Matrix out(R, C);
    int off = 0;
    for (Var p : parts) {
        const Matrix& pv = t.value(p);
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < pv.cols; ++j) out(i, off + j) = pv(i, j);
        off += pv.cols;
    }
    Var outv = t.record(std::move(out), req, nullptr);
    if (req) {
        std::vector<int> ids;
        std::vector<int> widths;
        for (Var p : parts) {
            ids.push_back(p.id);
            widths.push_back(t.value(p).cols);
        }
        int oid = outv.id;
        t.nodes_[oid].back = [ids, widths, oid, R](Tape& tp) {
            const Matrix& g = tp.nodes_[oid].grad;
            int off2 = 0;
            for (size_t k = 0; k < ids.size(); ++k) {
                if (tp.nodes_[ids[k]].req) {
                    Matrix& ga = tp.grad_buffer(ids[k]);
                    for (int i = 0; i < R; ++i)
                        for (int j = 0; j < widths[k]; ++j) ga(i, j) += g(i, off2 + j);
                }
                off2 += widths[k];
            }
        };
    }
    return outv;
}

}  // namespace qfit
