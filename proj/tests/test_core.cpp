#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "qfit/io.hpp"
#include "qfit/matrix.hpp"
#include "qfit/parallel.hpp"
#include "qfit/rng.hpp"
#include "qfit/stats.hpp"
#include "qfit/volume.hpp"

using namespace qfit;

namespace {
std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("pairwise_sum matches serial sum and is order-fixed") {
    std::vector<double> x;
    double serial = 0.0;
    for (int i = 0; i < 1000; ++i) {
        double v = std::sin(i * 0.37) * 1e3;
        x.push_back(v);
        serial += v;
    }
    CHECK(pairwise_sum(x) == doctest::Approx(serial).epsilon(1e-12));
    CHECK(pairwise_sum(x) == pairwise_sum(x));  // bitwise repeatable
    CHECK(pairwise_sum(x.data(), 0) == 0.0);
    CHECK(pairwise_sum(x.data(), 1) == x[0]);
}

TEST_CASE("parallel_for covers every index exactly once") {
    const size_t n = 100000;
    std::vector<int> hits(n, 0);
    parallel_for(n, [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) hits[i]++;
    });
    for (size_t i = 0; i < n; ++i) REQUIRE(hits[i] == 1);
}

TEST_CASE("inverse normal CDF round-trips through erf") {
    for (double p : {1e-10, 1e-4, 0.2, 0.5, 0.7, 1.0 - 1e-4, 1.0 - 1e-10}) {
        double z = inv_normal_cdf(p);
        double back = 0.5 * std::erfc(-z / std::sqrt(2.0));
        CHECK(back == doctest::Approx(p).epsilon(1e-10));
    }
    CHECK(inv_normal_cdf(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(inv_normal_cdf(0.0), DomainError);
    CHECK_THROWS_AS(inv_normal_cdf(1.0), DomainError);
}

TEST_CASE("counter rng is a pure function of its keys") {
    CounterRng a{42}, b{42}, c{43};
    CHECK(a.word(1, 2, 3, 4) == b.word(1, 2, 3, 4));
    CHECK(a.word(1, 2, 3, 4) != c.word(1, 2, 3, 4));
    CHECK(a.word(1, 2, 3, 4) != a.word(1, 2, 3, 5));
    CHECK(a.word(1, 2, 3, 4) != a.word(2, 1, 3, 4));
    double u = a.uniform(0, 0, 0, 0);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
}

TEST_CASE("counter rng normal has unit moments") {
    CounterRng rng{7};
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = rng.normal(i, 0, 0, 0);
        s += z;
        s2 += z * z;
    }
    double mean = s / n;
    double var = s2 / n - mean * mean;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("pack/unpack round-trip on random masks") {
    CounterRng rng{11};
    for (int trial = 0; trial < 5; ++trial) {
        Mask m;
        m.dims = {4, 3, 5};
        m.inside.resize(m.n_cells());
        int n_in = 0;
        for (size_t c = 0; c < m.n_cells(); ++c) {
            m.inside[c] = rng.uniform(trial, c, 0, 0) < 0.6 ? 1 : 0;
            n_in += m.inside[c];
        }
        if (n_in == 0) m.inside[0] = 1;

        Volume vol;
        vol.dims = m.dims;
        vol.n_meas = 3;
        vol.v.resize(vol.n_cells() * 3);
        for (size_t i = 0; i < vol.v.size(); ++i) vol.v[i] = rng.uniform(trial, i, 1, 0);

        MeasuredData d = pack(vol, m);
        REQUIRE(d.n_samples() == m.n_inside());
        Volume back = unpack(d.values, m, -1.0);
        for (size_t c = 0; c < m.n_cells(); ++c)
            for (int j = 0; j < 3; ++j) {
                if (m.inside[c]) {
                    CHECK(back.at(c, j) == vol.at(c, j));
                } else {
                    CHECK(back.at(c, j) == -1.0);
                }
            }
        // sample_origin maps rows back to their cells
        for (int r = 0; r < d.n_samples(); ++r)
            CHECK(m.inside[static_cast<size_t>(d.sample_origin[r])] == 1);
    }
}

TEST_CASE("grid_graph matches brute-force adjacency up to 5x5x5") {
    CounterRng rng{3};
    for (int trial = 0; trial < 4; ++trial) {
        Mask m;
        m.dims = {trial + 2, 5, trial % 2 ? 1 : 4};
        m.inside.resize(m.n_cells());
        for (size_t c = 0; c < m.n_cells(); ++c)
            m.inside[c] = rng.uniform(trial, c, 0, 0) < 0.7 ? 1 : 0;
        m.inside[0] = 1;

        for (auto conn : {GridConnectivity::four_2d, GridConnectivity::six_3d}) {
            NeighborGraph g = grid_graph(m, conn);
            g.validate();
            // brute force: packed ids of in-mask cells at L1 distance 1
            std::vector<int> packed(m.n_cells(), -1);
            int n = 0;
            for (size_t c = 0; c < m.n_cells(); ++c)
                if (m.inside[c]) packed[c] = n++;
            std::set<std::pair<int, int>> expect;
            int n_axes = conn == GridConnectivity::four_2d ? 2 : 3;
            for (int a0 = 0; a0 < m.dims[0]; ++a0)
                for (int a1 = 0; a1 < m.dims[1]; ++a1)
                    for (int a2 = 0; a2 < m.dims[2]; ++a2)
                        for (int b0 = 0; b0 < m.dims[0]; ++b0)
                            for (int b1 = 0; b1 < m.dims[1]; ++b1)
                                for (int b2 = 0; b2 < m.dims[2]; ++b2) {
                                    int dist = std::abs(a0 - b0) + std::abs(a1 - b1) +
                                               std::abs(a2 - b2);
                                    if (dist != 1) continue;
                                    if (n_axes == 2 && a2 != b2) continue;
                                    int pa = packed[(static_cast<size_t>(a0) * m.dims[1] + a1) *
                                                        m.dims[2] + a2];
                                    int pb = packed[(static_cast<size_t>(b0) * m.dims[1] + b1) *
                                                        m.dims[2] + b2];
                                    if (pa < 0 || pb < 0) continue;
                                    expect.insert({std::min(pa, pb), std::max(pa, pb)});
                                }
            std::set<std::pair<int, int>> got(g.edges.begin(), g.edges.end());
            CHECK(got == expect);
        }
    }
}

TEST_CASE("3x3 full grid has 12 four-neighbor edges") {
    Mask m = Mask::all_true({3, 3, 1});
    NeighborGraph g = grid_graph(m, GridConnectivity::four_2d);
    CHECK(g.n_nodes == 9);
    CHECK(g.edges.size() == 12);
}

TEST_CASE("icosahedron mesh yields 30 unique edges") {
    // standard icosahedron face list
    std::vector<std::array<int, 3>> faces = {
        {0, 1, 2},  {0, 2, 3},  {0, 3, 4},  {0, 4, 5},  {0, 5, 1},
        {1, 6, 2},  {2, 6, 7},  {2, 7, 3},  {3, 7, 8},  {3, 8, 4},
        {4, 8, 9},  {4, 9, 5},  {5, 9, 10}, {5, 10, 1}, {1, 10, 6},
        {11, 6, 10}, {11, 7, 6}, {11, 8, 7}, {11, 9, 8}, {11, 10, 9}};
    NeighborGraph g = mesh_graph(12, faces);
    CHECK(g.n_nodes == 12);
    CHECK(g.edges.size() == 30);
    g.validate();
    CHECK_THROWS_AS(mesh_graph(12, {{0, 1, 99}}), DataError);
}

TEST_CASE("graph validation rejects malformed edge lists") {
    NeighborGraph g;
    g.n_nodes = 3;
    g.edges = {{0, 0}};
    CHECK_THROWS_AS(g.validate(), DataError);
    g.edges = {{0, 1}, {1, 0}};
    CHECK_THROWS_AS(g.validate(), DataError);
    g.edges = {{0, 5}};
    CHECK_THROWS_AS(g.validate(), DataError);
}

TEST_CASE("stats oracles") {
    CHECK(iqr({1, 2, 3, 4}) == doctest::Approx(1.5));
    CHECK(cov({9, 10, 11}) == doctest::Approx(0.1));
    CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
    CHECK(pearson({1, 2, 3}, {6, 4, 2}) == doctest::Approx(-1.0));

    BlandAltman same = bland_altman({1, 2, 3}, {1, 2, 3});
    CHECK(same.bias == 0.0);
    CHECK(same.loa_low == 0.0);
    CHECK(same.loa_high == 0.0);

    BlandAltman sym = bland_altman({0, 2}, {1, 1});  // diffs -1, +1
    CHECK(sym.bias == doctest::Approx(0.0));
    CHECK(sym.loa_high == doctest::Approx(2.771858582251));
    CHECK(sym.loa_low == doctest::Approx(-2.771858582251));

    BlandAltman off = bland_altman({3, 4, 5}, {1, 2, 3});  // constant offset 2
    CHECK(off.bias == doctest::Approx(2.0));
    CHECK(off.loa_low == doctest::Approx(2.0));
    CHECK(off.loa_high == doctest::Approx(2.0));

    CHECK_THROWS_AS(bland_altman({1}, {1}), DataError);
    CHECK_THROWS_AS(cov({-1, 1}), DataError);
    CHECK_THROWS_AS(quantile({}, 0.5), DataError);
    CHECK_THROWS_AS(quantile({1.0}, 1.5), ConfigError);
}

TEST_CASE("nifti write/read round-trip, both precisions") {
    Volume vol;
    vol.dims = {3, 4, 2};
    vol.n_meas = 5;
    vol.v.resize(vol.n_cells() * 5);
    for (size_t i = 0; i < vol.v.size(); ++i) vol.v[i] = 0.25 * static_cast<double>(i) - 7.0;

    std::string p64 = tmp_path("qfit_test_f64.nii");
    write_nifti(p64, vol, false);
    Volume r64 = read_nifti(p64);
    REQUIRE(r64.dims == vol.dims);
    REQUIRE(r64.n_meas == 5);
    for (size_t i = 0; i < vol.v.size(); ++i) REQUIRE(r64.v[i] == vol.v[i]);

    std::string p32 = tmp_path("qfit_test_f32.nii");
    write_nifti(p32, vol, true);
    Volume r32 = read_nifti(p32);
    for (size_t i = 0; i < vol.v.size(); ++i)
        REQUIRE(r32.v[i] == doctest::Approx(vol.v[i]).epsilon(1e-6));

    CHECK_THROWS_AS(read_nifti(tmp_path("qfit_missing.nii")), DataError);
    std::remove(p64.c_str());
    std::remove(p32.c_str());
}

TEST_CASE("nifti rejects malformed headers") {
    std::string p = tmp_path("qfit_bad.nii");
    std::ofstream f(p, std::ios::binary);
    std::vector<char> junk(400, 0);
    f.write(junk.data(), junk.size());
    f.close();
    CHECK_THROWS_AS(read_nifti(p), DataError);
    std::remove(p.c_str());
}

TEST_CASE("mask nifti round-trip") {
    Mask m;
    m.dims = {4, 2, 3};
    m.inside.resize(m.n_cells());
    for (size_t c = 0; c < m.n_cells(); ++c) m.inside[c] = c % 3 == 0 ? 1 : 0;
    std::string p = tmp_path("qfit_mask.nii");
    write_mask_nifti(p, m);
    Mask r = read_mask_nifti(p);
    CHECK(r.dims == m.dims);
    CHECK(r.inside == m.inside);
    std::remove(p.c_str());
}

TEST_CASE("protocol json round-trip, flat and per-sample") {
    Protocol prot;
    prot.axes.push_back({"TE_s", Matrix::row({0.005, 0.01, 0.015})});
    prot.axes.push_back({"bval_ms_per_um2", Matrix::from(2, 3, {0, 1, 2, 0, 1.5, 3})});
    std::string p = tmp_path("qfit_prot.json");
    write_protocol_json(p, prot);
    Protocol r = read_protocol_json(p);
    REQUIRE(r.axes.size() == 2);
    const Matrix& te = r.axis("TE_s");
    CHECK(te.rows == 1);
    CHECK(te.cols == 3);
    CHECK(te(0, 2) == 0.015);
    const Matrix& b = r.axis("bval_ms_per_um2");
    CHECK(b.rows == 2);
    CHECK(b(1, 1) == 1.5);
    std::remove(p.c_str());
}

TEST_CASE("mesh json accepts faces or edges") {
    std::string p = tmp_path("qfit_mesh.json");
    {
        std::ofstream f(p);
        f << R"({"n_vertices": 4, "faces": [[0,1,2],[1,2,3]]})";
    }
    NeighborGraph g = read_mesh_json(p);
    CHECK(g.n_nodes == 4);
    CHECK(g.edges.size() == 5);
    {
        std::ofstream f(p);
        f << R"({"n_vertices": 3, "edges": [[0,1],[1,2]]})";
    }
    g = read_mesh_json(p);
    CHECK(g.edges.size() == 2);
    {
        std::ofstream f(p);
        f << R"({"n_vertices": 3})";
    }
    CHECK_THROWS_AS(read_mesh_json(p), DataError);
    std::remove(p.c_str());
}

TEST_CASE("complex64 raw round-trip") {
    ComplexArray arr;
    arr.shape = {2, 3, 2, 1};
    arr.v.resize(12);
    for (size_t i = 0; i < arr.v.size(); ++i)
        arr.v[i] = {static_cast<double>(i), -0.5 * static_cast<double>(i)};
    std::string d = tmp_path("qfit_k.cfl"), s = tmp_path("qfit_k.json");
    write_complex64(d, s, arr);
    ComplexArray r = read_complex64(d, s);
    CHECK(r.shape == arr.shape);
    for (size_t i = 0; i < arr.v.size(); ++i) {
        CHECK(r.v[i].real() == doctest::Approx(arr.v[i].real()));
        CHECK(r.v[i].imag() == doctest::Approx(arr.v[i].imag()));
    }
    std::remove(d.c_str());
    std::remove(s.c_str());
}

TEST_CASE("csv writer emits one row per record") {
    std::string p = tmp_path("qfit_test.csv");
    write_csv(p, {"a", "b"}, {{1, 2}, {3.5, -4}});
    std::ifstream f(p);
    std::string line;
    std::getline(f, line);
    CHECK(line == "a,b");
    std::getline(f, line);
    CHECK(line == "1,2");
    std::getline(f, line);
    CHECK(line == "3.5,-4");
    std::remove(p.c_str());
}
