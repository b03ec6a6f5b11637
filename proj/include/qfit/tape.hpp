#pragma once

#include <functional>
#include <vector>

#include "qfit/matrix.hpp"
#include "qfit/volume.hpp"

namespace qfit {

class Tape;

// Handle to a tape node. Cheap to copy; valid for the lifetime of the tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    int rows() const;
    int cols() const;
};

// User-supplied real-linear operator with its exact adjoint. Lets linear
// maps (e.g. DFTs) participate in differentiation without entering the
// elementwise op set.
struct LinearMap {
    std::function<Matrix(const Matrix&)> apply;
    std::function<Matrix(const Matrix&)> adjoint;
};

// Reverse-mode autodiff over matrices. Nodes are recorded in topological
// order; backward() walks them in reverse. One tape per fit, single owner.
class Tape {
public:
    Var lift(Matrix value, bool requires_grad = false);
    Var lift_scalar(double s) { return lift(Matrix(1, 1, s), false); }

    const Matrix& value(Var x) const;
    bool requires_grad(Var x) const;

    // Root must be 1x1. Gradients are zeroed first, so repeated calls on an
    // unchanged tape give identical results.
    void backward(Var root);

    const Matrix& grad(Var x) const;
    bool has_grad(Var x) const;

    size_t n_nodes() const { return nodes_.size(); }
    void clear();

private:
    struct Node {
        Matrix val;
        Matrix grad;
        bool req = false;
        std::function<void(Tape&)> back;
    };
    std::vector<Node> nodes_;

    Var record(Matrix value, bool req, std::function<void(Tape&)> back);
    Matrix& grad_buffer(int id);
    void accumulate(int id, int i, int j, double g);

    friend Var binary_op_impl(Var a, Var b, int kind);
    friend Var unary_op_impl(Var a, int kind, double c);
    friend Var sum_all(Var a);
    friend Var sum_over_meas(Var a);
    friend Var broadcast_meas(Var a, int n_meas);
    friend Var apply_linear(Var a, const LinearMap& map);
    friend Var edge_diff(Var field, const NeighborGraph& graph);
    friend Var hconcat(const std::vector<Var>& parts);
};

// Elementwise binary ops; shapes must match or broadcast (a dim of 1
// stretches against the other operand).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);  // |denominator| clamped to >= 1e-30

Var add(Var a, double c);
Var sub(Var a, double c);
Var sub(double c, Var a);
Var mul(Var a, double c);

Var neg(Var a);
Var vexp(Var a);
Var vlog(Var a);   // domain error on negative input
Var vsqrt(Var a);  // domain error on negative input
Var square(Var a);
Var pow_const(Var a, double p);
Var verf(Var a);
Var vabs(Var a);  // subgradient sign(x), sign(0) = 0
Var smooth_abs(Var a, double eps);
Var sigmoid(Var a);

Var sum_all(Var a);                // -> (1,1), pairwise reduction
Var sum_over_meas(Var a);          // (n,m) -> (n,1)
Var broadcast_meas(Var a, int n_meas);  // (n,1) -> (n,m)

Var apply_linear(Var a, const LinearMap& map);
Var edge_diff(Var field, const NeighborGraph& graph);  // (n,1) -> (E,1)
Var hconcat(const std::vector<Var>& parts);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator+(Var a, double c) { return add(a, c); }
inline Var operator+(double c, Var a) { return add(a, c); }
inline Var operator-(Var a, double c) { return sub(a, c); }
inline Var operator-(double c, Var a) { return sub(c, a); }
inline Var operator*(Var a, double c) { return mul(a, c); }
inline Var operator*(double c, Var a) { return mul(a, c); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace qfit
