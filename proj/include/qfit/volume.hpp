#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qfit/matrix.hpp"

namespace qfit {

// Grid cells are linearized row-major: cell = (i0*d1 + i1)*d2 + i2, i.e.
// the last axis varies fastest. Packed sample indices follow this order.
struct Mask {
    std::array<int, 3> dims{1, 1, 1};
    std::vector<uint8_t> inside;

    size_t n_cells() const {
        return static_cast<size_t>(dims[0]) * dims[1] * dims[2];
    }
    int n_inside() const;
    void validate() const;

    static Mask all_true(std::array<int, 3> dims);
};

struct MeasuredData {
    Matrix values;                      // [n_samples x n_meas]
    Matrix weights;                     // same shape, or empty for all-ones
    std::vector<int64_t> sample_origin; // packed index -> grid cell, optional

    int n_samples() const { return values.rows; }
    int n_meas() const { return values.cols; }
    void validate() const;
};

struct ParamSet {
    struct Entry {
        std::string name;
        std::vector<double> values;  // [n_samples]
        double lb = 0.0;
        double ub = 1.0;
    };
    std::vector<Entry> params;

    int n_samples() const { return params.empty() ? 0 : static_cast<int>(params[0].values.size()); }
    bool has(const std::string& name) const;
    Entry& find(const std::string& name);
    const Entry& find(const std::string& name) const;
    void validate() const;
};

struct Protocol {
    struct Axis {
        std::string name;
        Matrix values;  // (1 x n_meas) or (n_samples x n_meas)
    };
    std::vector<Axis> axes;

    bool has(const std::string& name) const;
    const Matrix& axis(const std::string& name) const;
    void validate() const;
};

struct NeighborGraph {
    int n_nodes = 0;
    std::vector<std::pair<int, int>> edges;  // i < j, unique, no self-loops

    void validate() const;
};

struct Volume {
    std::array<int, 3> dims{1, 1, 1};
    int n_meas = 1;
    std::vector<double> v;  // [cell * n_meas + m], cells row-major

    size_t n_cells() const {
        return static_cast<size_t>(dims[0]) * dims[1] * dims[2];
    }
    double& at(size_t cell, int m) { return v[cell * n_meas + m]; }
    double at(size_t cell, int m) const { return v[cell * n_meas + m]; }
};

enum class GridConnectivity { four_2d, six_3d };

MeasuredData pack(const Volume& volume, const Mask& mask);
Volume unpack(const Matrix& packed, const Mask& mask, double fill);

NeighborGraph grid_graph(const Mask& mask, GridConnectivity connectivity);
NeighborGraph mesh_graph(int n_vertices, const std::vector<std::array<int, 3>>& faces);
NeighborGraph mesh_graph_edges(int n_vertices, const std::vector<std::pair<int, int>>& edges);

}  // namespace qfit
