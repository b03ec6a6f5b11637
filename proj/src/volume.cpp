#include "qfit/volume.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace qfit {

int Mask::n_inside() const {
    int n = 0;
    for (uint8_t b : inside) n += (b != 0);
    return n;
}

void Mask::validate() const {
    if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
        throw ShapeError("Mask: all dims must be >= 1");
    if (inside.size() != n_cells())
        throw ShapeError("Mask: inside size does not match dims");
    if (n_inside() == 0) throw DataError("Mask: no cells inside");
}

Mask Mask::all_true(std::array<int, 3> dims) {
    Mask m;
    m.dims = dims;
    m.inside.assign(static_cast<size_t>(dims[0]) * dims[1] * dims[2], 1);
    return m;
}

void MeasuredData::validate() const {
    if (values.rows < 1) throw DataError("MeasuredData: need at least one sample");
    if (!all_finite(values)) throw DataError("MeasuredData: non-finite values");
    if (!weights.empty()) {
        if (!weights.same_shape(values))
            throw ShapeError("MeasuredData: weights shape must match values");
        for (double w : weights.v) {
            if (!std::isfinite(w) || w < 0.0)
                throw DataError("MeasuredData: weights must be finite and non-negative");
        }
    }
}

bool ParamSet::has(const std::string& name) const {
    for (const auto& p : params)
        if (p.name == name) return true;
    return false;
}

ParamSet::Entry& ParamSet::find(const std::string& name) {
    for (auto& p : params)
        if (p.name == name) return p;
    throw ConfigError("ParamSet: unknown parameter '" + name + "'");
}

const ParamSet::Entry& ParamSet::find(const std::string& name) const {
    for (const auto& p : params)
        if (p.name == name) return p;
    throw ConfigError("ParamSet: unknown parameter '" + name + "'");
}

void ParamSet::validate() const {
    std::set<std::string> seen;
    size_t n = params.empty() ? 0 : params[0].values.size();
    for (const auto& p : params) {
        if (!seen.insert(p.name).second)
            throw ConfigError("ParamSet: duplicate parameter name '" + p.name + "'");
        if (!(p.lb < p.ub))
            throw ConfigError("ParamSet: lb must be < ub for '" + p.name + "'");
        if (p.values.size() != n)
            throw ShapeError("ParamSet: inconsistent field lengths");
        for (double x : p.values) {
            if (!std::isfinite(x) || x < p.lb || x > p.ub)
                throw DataError("ParamSet: value out of bounds for '" + p.name + "'");
        }
    }
}

bool Protocol::has(const std::string& name) const {
    for (const auto& a : axes)
        if (a.name == name) return true;
    return false;
}

const Matrix& Protocol::axis(const std::string& name) const {
    for (const auto& a : axes)
        if (a.name == name) return a.values;
    throw ConfigError("Protocol: missing axis '" + name + "'");
}

void Protocol::validate() const {
    for (const auto& a : axes)
        if (!all_finite(a.values))
            throw DataError("Protocol: non-finite values in axis '" + a.name + "'");
}

void NeighborGraph::validate() const {
    std::set<std::pair<int, int>> seen;
    for (auto [i, j] : edges) {
        if (i == j) throw DataError("NeighborGraph: self-loop");
        if (i < 0 || j < 0 || i >= n_nodes || j >= n_nodes)
            throw DataError("NeighborGraph: edge index out of range");
        if (i > j) std::swap(i, j);
        if (!seen.insert({i, j}).second) throw DataError("NeighborGraph: duplicate edge");
    }
}

MeasuredData pack(const Volume& volume, const Mask& mask) {
    mask.validate();
    if (volume.dims != mask.dims)
        throw ShapeError("pack: volume dims do not match mask dims");
    if (volume.v.size() != volume.n_cells() * volume.n_meas)
        throw ShapeError("pack: volume buffer size mismatch");

    MeasuredData out;
    int n = mask.n_inside();
    out.values = Matrix(n, volume.n_meas);
    out.sample_origin.reserve(n);
    int row = 0;
    for (size_t cell = 0; cell < mask.n_cells(); ++cell) {
        if (!mask.inside[cell]) continue;
        for (int m = 0; m < volume.n_meas; ++m) out.values(row, m) = volume.at(cell, m);
        out.sample_origin.push_back(static_cast<int64_t>(cell));
        ++row;
    }
    return out;
}

Volume unpack(const Matrix& packed, const Mask& mask, double fill) {
    mask.validate();
    if (packed.rows != mask.n_inside())
        throw ShapeError("unpack: packed row count does not match mask true-count");

    Volume out;
    out.dims = mask.dims;
    out.n_meas = packed.cols;
    out.v.assign(out.n_cells() * out.n_meas, fill);
    int row = 0;
    for (size_t cell = 0; cell < mask.n_cells(); ++cell) {
        if (!mask.inside[cell]) continue;
        for (int m = 0; m < packed.cols; ++m) out.at(cell, m) = packed(row, m);
        ++row;
    }
    return out;
}

NeighborGraph grid_graph(const Mask& mask, GridConnectivity connectivity) {
    mask.validate();
    const auto& d = mask.dims;
    int n_axes = (connectivity == GridConnectivity::four_2d) ? 2 : 3;

    // packed index per cell, -1 outside
    std::vector<int> packed(mask.n_cells(), -1);
    int n = 0;
    for (size_t cell = 0; cell < mask.n_cells(); ++cell)
        if (mask.inside[cell]) packed[cell] = n++;

    NeighborGraph g;
    g.n_nodes = n;
    auto cell_of = [&](int i0, int i1, int i2) {
        return (static_cast<size_t>(i0) * d[1] + i1) * d[2] + i2;
    };
    for (int i0 = 0; i0 < d[0]; ++i0) {
        for (int i1 = 0; i1 < d[1]; ++i1) {
            for (int i2 = 0; i2 < d[2]; ++i2) {
                int a = packed[cell_of(i0, i1, i2)];
                if (a < 0) continue;
                if (i0 + 1 < d[0]) {
                    int b = packed[cell_of(i0 + 1, i1, i2)];
                    if (b >= 0) g.edges.emplace_back(std::min(a, b), std::max(a, b));
                }
                if (i1 + 1 < d[1]) {
                    int b = packed[cell_of(i0, i1 + 1, i2)];
                    if (b >= 0) g.edges.emplace_back(std::min(a, b), std::max(a, b));
                }
                if (n_axes == 3 && i2 + 1 < d[2]) {
                    int b = packed[cell_of(i0, i1, i2 + 1)];
                    if (b >= 0) g.edges.emplace_back(std::min(a, b), std::max(a, b));
                }
            }
        }
    }
    std::sort(g.edges.begin(), g.edges.end());
    return g;
}

NeighborGraph mesh_graph(int n_vertices, const std::vector<std::array<int, 3>>& faces) {
    std::set<std::pair<int, int>> edge_set;
    for (const auto& f : faces) {
        for (int k = 0; k < 3; ++k) {
            int i = f[k], j = f[(k + 1) % 3];
            if (i < 0 || j < 0 || i >= n_vertices || j >= n_vertices)
                throw DataError("mesh_graph: vertex index out of range");
            if (i == j) continue;
            edge_set.insert({std::min(i, j), std::max(i, j)});
        }
    }
    NeighborGraph g;
    g.n_nodes = n_vertices;
    g.edges.assign(edge_set.begin(), edge_set.end());
    return g;
}

NeighborGraph mesh_graph_edges(int n_vertices, const std::vector<std::pair<int, int>>& edges) {
    std::set<std::pair<int, int>> edge_set;
    for (auto [i, j] : edges) {
        if (i < 0 || j < 0 || i >= n_vertices || j >= n_vertices)
            throw DataError("mesh_graph: vertex index out of range");
        if (i == j) continue;
        edge_set.insert({std::min(i, j), std::max(i, j)});
    }
    NeighborGraph g;
    g.n_nodes = n_vertices;
    g.edges.assign(edge_set.begin(), edge_set.end());
    return g;
}

}  // namespace qfit
