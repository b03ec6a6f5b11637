#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "qfit/solver.hpp"

namespace qfit {

using cplx = std::complex<double>;

// Layouts (row-major): kspace[((e*n_coil + c)*ky + iy)*kz + iz],
// coilmaps[(c*ky + iy)*kz + iz], sampling[(e*ky + iy)*kz + iz],
// images[(e*ky + iy)*kz + iz].
struct ReconProblem {
    int ky = 0, kz = 0, n_coil = 0, n_echo = 0;
    std::vector<cplx> kspace;
    std::vector<cplx> coilmaps;
    std::vector<uint8_t> sampling;
    double lambda_tv = 0.0;

    size_t image_size() const { return static_cast<size_t>(n_echo) * ky * kz; }
    size_t kspace_size() const { return static_cast<size_t>(n_echo) * n_coil * ky * kz; }
    void validate() const;
};

// Unitary 2D DFT (1/sqrt(N) both ways); sign -1 = forward.
void dft2(const cplx* in, cplx* out, int ny, int nz, int sign);
std::vector<cplx> dft2(const std::vector<cplx>& in, int ny, int nz, int sign);

// E: image -> masked multi-coil k-space, per echo: M . DFT2(C . I).
std::vector<cplx> encode(const std::vector<cplx>& image, const ReconProblem& p);
// Exact adjoint of encode under the standard complex inner product.
std::vector<cplx> encode_adjoint(const std::vector<cplx>& kspace, const ReconProblem& p);

// sampled iff (kz + z_shift*ky + te_shift*echo) mod Rz == 0
std::vector<uint8_t> caipi_mask(int ky, int kz, int Rz, int z_shift, int te_shift, int n_echo);

struct LsqrResult {
    std::vector<cplx> image;
    int iterations = 0;
    bool converged = false;
    double relative_residual = 0.0;
};

// CG on the normal equations (E^H E + lambda I) I = E^H k.
LsqrResult recon_lsqr(const ReconProblem& p, double lambda_tikhonov, int max_iter = 500,
                      double tol = 1e-10);

struct GdReconResult {
    std::vector<cplx> image;
    FitResult fit;
};

// Gradient-descent reconstruction via the whole-volume solver on
// real/imaginary-split image fields; TV applied per echo and per component
// over the 2D grid graph.
GdReconResult recon_gd(const ReconProblem& p, LossKind loss, double lambda_tv,
                       SolverOptions solver_options);

double nrmse(const std::vector<cplx>& x, const std::vector<cplx>& ref);

}  // namespace qfit
