#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "qfit/errors.hpp"

namespace qfit {

// Dense row-major matrix of doubles. Rows index samples, columns index
// measurements (or parameters, depending on context).
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), v(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
        if (r < 0 || c < 0) throw ShapeError("Matrix: negative dimension");
    }

    static Matrix from(int r, int c, std::initializer_list<double> vals) {
        Matrix m(r, c);
        if (vals.size() != m.v.size()) throw ShapeError("Matrix::from: size mismatch");
        size_t i = 0;
        for (double x : vals) m.v[i++] = x;
        return m;
    }

    static Matrix column(const std::vector<double>& vals) {
        Matrix m(static_cast<int>(vals.size()), 1);
        m.v = vals;
        return m;
    }

    static Matrix row(const std::vector<double>& vals) {
        Matrix m(1, static_cast<int>(vals.size()));
        m.v = vals;
        return m;
    }

    double& operator()(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }

    size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// Fixed-tree pairwise summation. The reduction order depends only on n,
// never on thread count, so reductions built on it are run-to-run and
// thread-count invariant.
double pairwise_sum(const double* p, size_t n);

inline double pairwise_sum(const std::vector<double>& x) {
    return pairwise_sum(x.data(), x.size());
}

bool all_finite(const Matrix& m);

}  // namespace qfit
