#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "qfit/recon.hpp"
#include "qfit/rng.hpp"

using namespace qfit;

namespace {

std::vector<cplx> random_cvec(size_t n, uint64_t seed) {
    CounterRng rng{seed};
    std::vector<cplx> v(n);
    for (size_t i = 0; i < n; ++i)
        v[i] = cplx(rng.normal(i, 0, 0, 0), rng.normal(i, 0, 0, 1));
    return v;
}

cplx cdot(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    cplx s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

double cnorm(const std::vector<cplx>& a) { return std::sqrt(std::real(cdot(a, a))); }

// smooth two-echo phantom with varying coil sensitivities
ReconProblem make_problem(int ky, int kz, int n_coil, int n_echo, int Rz, int z_shift,
                          int te_shift) {
    ReconProblem p;
    p.ky = ky;
    p.kz = kz;
    p.n_coil = n_coil;
    p.n_echo = n_echo;
    // generic (random, well-conditioned) sensitivities so aliased voxels
    // stay distinguishable at any acceleration
    p.coilmaps.resize(static_cast<size_t>(n_coil) * ky * kz);
    CounterRng rng{99};
    for (size_t i = 0; i < p.coilmaps.size(); ++i)
        p.coilmaps[i] = cplx(0.8 + 0.4 * rng.uniform(i, 0, 0, 0),
                             0.6 * (rng.uniform(i, 0, 0, 1) - 0.5));
    p.sampling = caipi_mask(ky, kz, Rz, z_shift, te_shift, n_echo);
    p.kspace.assign(p.kspace_size(), cplx(0.0, 0.0));
    return p;
}

std::vector<cplx> make_image(const ReconProblem& p) {
    std::vector<cplx> img(p.image_size());
    for (int e = 0; e < p.n_echo; ++e)
        for (int iy = 0; iy < p.ky; ++iy)
            for (int iz = 0; iz < p.kz; ++iz) {
                double r = std::hypot(iy - p.ky / 2.0, iz - p.kz / 2.0);
                double mag = (r < p.ky / 3.0) ? 1.0 : 0.2;
                mag *= std::exp(-0.3 * e);
                img[(static_cast<size_t>(e) * p.ky + iy) * p.kz + iz] =
                    cplx(mag, 0.1 * mag * std::sin(0.5 * iy));
            }
    return img;
}

}  // namespace

TEST_CASE("dft2 matches a directly coded reference transform") {
    const int ny = 4, nz = 3;
    auto x = random_cvec(static_cast<size_t>(ny) * nz, 3);
    auto got = dft2(x, ny, nz, -1);
    const cplx I(0.0, 1.0);
    for (int ky = 0; ky < ny; ++ky)
        for (int kzz = 0; kzz < nz; ++kzz) {
            cplx s = 0.0;
            for (int iy = 0; iy < ny; ++iy)
                for (int iz = 0; iz < nz; ++iz)
                    s += x[static_cast<size_t>(iy) * nz + iz] *
                         std::exp(-2.0 * M_PI * I *
                                  (static_cast<double>(ky) * iy / ny +
                                   static_cast<double>(kzz) * iz / nz));
            s /= std::sqrt(static_cast<double>(ny) * nz);
            CHECK(std::abs(got[static_cast<size_t>(ky) * nz + kzz] - s) < 1e-12);
        }
}

TEST_CASE("dft2 is unitary") {
    const int ny = 8, nz = 5;
    auto x = random_cvec(static_cast<size_t>(ny) * nz, 7);
    auto f = dft2(x, ny, nz, -1);
    CHECK(cnorm(f) == doctest::Approx(cnorm(x)).epsilon(1e-12));  // Parseval
    auto back = dft2(f, ny, nz, +1);
    for (size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) < 1e-12);
    // linearity
    auto y = random_cvec(x.size(), 8);
    std::vector<cplx> lin(x.size());
    for (size_t i = 0; i < x.size(); ++i) lin[i] = 2.0 * x[i] + cplx(0, 1) * y[i];
    auto flin = dft2(lin, ny, nz, -1);
    auto fy = dft2(y, ny, nz, -1);
    for (size_t i = 0; i < x.size(); ++i)
        CHECK(std::abs(flin[i] - (2.0 * f[i] + cplx(0, 1) * fy[i])) < 1e-12);
}

TEST_CASE("encode_adjoint is the exact adjoint of encode") {
    ReconProblem p = make_problem(6, 5, 3, 2, 2, 1, 1);
    auto x = random_cvec(p.image_size(), 11);
    auto y = random_cvec(p.kspace_size(), 12);
    auto Ex = encode(x, p);
    auto Ety = encode_adjoint(y, p);
    cplx lhs = cdot(y, Ex);   // <y, Ex>
    cplx rhs = cdot(Ety, x);  // <E^H y, x>
    CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-12);
}

TEST_CASE("caipi mask patterns") {
    // Rz = 1 samples everything
    auto all = caipi_mask(4, 4, 1, 0, 0, 2);
    for (uint8_t m : all) CHECK(m == 1);

    // Rz = 3, z shift 1: diagonal pattern, one third of locations per echo
    auto m3 = caipi_mask(6, 6, 3, 1, 0, 1);
    int count = 0;
    for (int iy = 0; iy < 6; ++iy)
        for (int iz = 0; iz < 6; ++iz) {
            bool want = ((iz + iy) % 3) == 0;
            CHECK(m3[static_cast<size_t>(iy) * 6 + iz] == (want ? 1 : 0));
            count += m3[static_cast<size_t>(iy) * 6 + iz];
        }
    CHECK(count == 12);

    // te shift moves the pattern between echoes
    auto m2e = caipi_mask(6, 6, 3, 1, 1, 2);
    for (int iy = 0; iy < 6; ++iy)
        for (int iz = 0; iz < 6; ++iz) {
            CHECK(m2e[static_cast<size_t>(iy) * 6 + iz] == (((iz + iy) % 3 == 0) ? 1 : 0));
            CHECK(m2e[36 + static_cast<size_t>(iy) * 6 + iz] ==
                  (((iz + iy + 1) % 3 == 0) ? 1 : 0));
        }
}

TEST_CASE("lsqr recovers the image exactly when encoding is unitary") {
    // single coil, unit sensitivities, full sampling: E is the unitary DFT
    ReconProblem p;
    p.ky = 8;
    p.kz = 8;
    p.n_coil = 1;
    p.n_echo = 1;
    p.coilmaps.assign(64, cplx(1.0, 0.0));
    p.sampling.assign(64, 1);
    p.kspace.assign(p.kspace_size(), cplx(0.0, 0.0));
    auto img = make_image(p);
    p.kspace = encode(img, p);
    LsqrResult r = recon_lsqr(p, 0.0, 100, 1e-12);
    CHECK(r.converged);
    CHECK(nrmse(r.image, img) < 1e-10);
}

TEST_CASE("lsqr solves the undersampled multi-coil problem") {
    ReconProblem p = make_problem(12, 12, 4, 2, 3, 1, 1);
    auto img = make_image(p);
    p.kspace = encode(img, p);
    LsqrResult r = recon_lsqr(p, 0.0, 2000, 1e-12);
    CHECK(nrmse(r.image, img) < 1e-3);
}

TEST_CASE("gradient-descent recon agrees with lsqr") {
    ReconProblem p = make_problem(8, 8, 4, 1, 2, 1, 0);
    auto img = make_image(p);
    p.kspace = encode(img, p);
    LsqrResult ls = recon_lsqr(p, 0.0, 200, 1e-10);
    SolverOptions so;
    so.optimizer = OptimizerKind::adam;
    so.iteration = 3000;
    so.initialLearnRate = 0.02;
    so.tol = 0.0;
    so.convergenceValue = 0.0;
    GdReconResult gd = recon_gd(p, LossKind::l2, 0.0, so);
    double e_ls = nrmse(ls.image, img);
    double e_gd = nrmse(gd.image, img);
    CHECK(e_ls < 1e-6);
    CHECK(e_gd < 0.05);
    CHECK(std::abs(e_gd - e_ls) < 0.05);
}

TEST_CASE("nrmse oracle") {
    std::vector<cplx> ref{cplx(3.0, 0.0), cplx(0.0, 4.0)};
    std::vector<cplx> x{cplx(3.0, 1.0), cplx(0.0, 4.0)};
    CHECK(nrmse(x, ref) == doctest::Approx(1.0 / 5.0).epsilon(1e-12));
    CHECK(nrmse(ref, ref) == doctest::Approx(0.0));
    std::vector<cplx> zero{cplx(0.0, 0.0), cplx(0.0, 0.0)};
    CHECK_THROWS_AS(nrmse(x, zero), DataError);
    std::vector<cplx> shorter{cplx(1.0, 0.0)};
    CHECK_THROWS_AS(nrmse(shorter, ref), ShapeError);
}

TEST_CASE("problem validation") {
    ReconProblem p = make_problem(4, 4, 2, 1, 1, 0, 0);
    auto img = make_image(p);
    p.kspace = encode(img, p);
    p.validate();

    ReconProblem bad = p;
    bad.kspace.pop_back();
    CHECK_THROWS_AS(bad.validate(), ShapeError);
    bad = p;
    bad.coilmaps[0] = cplx(std::nan(""), 0.0);
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = p;
    bad.sampling.assign(bad.sampling.size(), 0);
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = p;
    bad.ky = 0;
    CHECK_THROWS_AS(bad.validate(), ShapeError);
}
