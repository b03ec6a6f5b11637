#include "qfit/recon.hpp"

#include <cmath>

namespace qfit {

void ReconProblem::validate() const {
    if (ky < 1 || kz < 1 || n_coil < 1 || n_echo < 1)
        throw ShapeError("recon: all dimensions must be >= 1");
    if (kspace.size() != kspace_size()) throw ShapeError("recon: kspace size mismatch");
    if (coilmaps.size() != static_cast<size_t>(n_coil) * ky * kz)
        throw ShapeError("recon: coilmaps size mismatch");
    if (sampling.size() != static_cast<size_t>(n_echo) * ky * kz)
        throw ShapeError("recon: sampling size mismatch");
    for (const cplx& c : coilmaps)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
            throw DataError("recon: non-finite coil map");
    for (int e = 0; e < n_echo; ++e) {
        bool any = false;
        for (int i = 0; i < ky * kz && !any; ++i)
            any = sampling[static_cast<size_t>(e) * ky * kz + i] != 0;
        if (!any) throw DataError("recon: echo with no sampled locations");
    }
}

namespace {

void dft1(const cplx* in, cplx* out, int n, int sign) {
    double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int k = 0; k < n; ++k) {
        cplx acc(0.0, 0.0);
        for (int j = 0; j < n; ++j) {
            double ang = sign * 2.0 * M_PI * k * j / n;
            acc += in[j] * cplx(std::cos(ang), std::sin(ang));
        }
        out[k] = acc * scale;
    }
}

}  // namespace

void dft2(const cplx* in, cplx* out, int ny, int nz, int sign) {
    std::vector<cplx> tmp(static_cast<size_t>(ny) * nz);
    // along z (contiguous rows)
    for (int y = 0; y < ny; ++y) dft1(in + static_cast<size_t>(y) * nz, tmp.data() + static_cast<size_t>(y) * nz, nz, sign);
    // along y (strided)
    std::vector<cplx> col(ny), colf(ny);
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) col[y] = tmp[static_cast<size_t>(y) * nz + z];
        dft1(col.data(), colf.data(), ny, sign);
        for (int y = 0; y < ny; ++y) out[static_cast<size_t>(y) * nz + z] = colf[y];
    }
}

std::vector<cplx> dft2(const std::vector<cplx>& in, int ny, int nz, int sign) {
    if (in.size() != static_cast<size_t>(ny) * nz) throw ShapeError("dft2: size mismatch");
    std::vector<cplx> out(in.size());
    dft2(in.data(), out.data(), ny, nz, sign);
    return out;
}

std::vector<cplx> encode(const std::vector<cplx>& image, const ReconProblem& p) {
    p.validate();
    if (image.size() != p.image_size()) throw ShapeError("encode: image size mismatch");
    const size_t plane = static_cast<size_t>(p.ky) * p.kz;
    std::vector<cplx> out(p.kspace_size());
    std::vector<cplx> tmp(plane), f(plane);
    for (int e = 0; e < p.n_echo; ++e) {
        const cplx* img = image.data() + e * plane;
        const uint8_t* m = p.sampling.data() + e * plane;
        for (int c = 0; c < p.n_coil; ++c) {
            const cplx* cm = p.coilmaps.data() + c * plane;
            for (size_t i = 0; i < plane; ++i) tmp[i] = cm[i] * img[i];
            dft2(tmp.data(), f.data(), p.ky, p.kz, -1);
            cplx* dst = out.data() + (static_cast<size_t>(e) * p.n_coil + c) * plane;
            for (size_t i = 0; i < plane; ++i) dst[i] = m[i] ? f[i] : cplx(0.0, 0.0);
        }
    }
    return out;
}

std::vector<cplx> encode_adjoint(const std::vector<cplx>& kspace, const ReconProblem& p) {
    p.validate();
    if (kspace.size() != p.kspace_size()) throw ShapeError("encode_adjoint: k-space size mismatch");
    const size_t plane = static_cast<size_t>(p.ky) * p.kz;
    std::vector<cplx> out(p.image_size(), cplx(0.0, 0.0));
    std::vector<cplx> tmp(plane), f(plane);
    for (int e = 0; e < p.n_echo; ++e) {
        const uint8_t* m = p.sampling.data() + e * plane;
        cplx* img = out.data() + e * plane;
        for (int c = 0; c < p.n_coil; ++c) {
            const cplx* src = kspace.data() + (static_cast<size_t>(e) * p.n_coil + c) * plane;
            const cplx* cm = p.coilmaps.data() + c * plane;
            for (size_t i = 0; i < plane; ++i) tmp[i] = m[i] ? src[i] : cplx(0.0, 0.0);
            dft2(tmp.data(), f.data(), p.ky, p.kz, +1);
            for (size_t i = 0; i < plane; ++i) img[i] += std::conj(cm[i]) * f[i];
        }
    }
    return out;
}

std::vector<uint8_t> caipi_mask(int ky, int kz, int Rz, int z_shift, int te_shift, int n_echo) {
    if (Rz < 1) throw ConfigError("caipi_mask: Rz must be >= 1");
    std::vector<uint8_t> m(static_cast<size_t>(n_echo) * ky * kz, 0);
    for (int e = 0; e < n_echo; ++e)
        for (int y = 0; y < ky; ++y)
            for (int z = 0; z < kz; ++z) {
                long v = static_cast<long>(z) + static_cast<long>(z_shift) * y +
                         static_cast<long>(te_shift) * e;
                if (((v % Rz) + Rz) % Rz == 0)
                    m[(static_cast<size_t>(e) * ky + y) * kz + z] = 1;
            }
    return m;
}

namespace {

double cnorm(const std::vector<cplx>& x) {
    double s = 0.0;
    for (const cplx& c : x) s += std::norm(c);
    return std::sqrt(s);
}

}  // namespace

LsqrResult recon_lsqr(const ReconProblem& p, double lambda_tikhonov, int max_iter, double tol) {
    p.validate();
    auto normal_op = [&](const std::vector<cplx>& x) {
        std::vector<cplx> y = encode_adjoint(encode(x, p), p);
        if (lambda_tikhonov > 0.0)
            for (size_t i = 0; i < y.size(); ++i) y[i] += lambda_tikhonov * x[i];
        return y;
    };
    std::vector<cplx> b = encode_adjoint(p.kspace, p);
    double bnorm = cnorm(b);
    LsqrResult res;
    res.image.assign(p.image_size(), cplx(0.0, 0.0));
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }

    std::vector<cplx> r = b, z = r, best = res.image;
    double best_rel = 1.0;
    double rsold = 0.0;
    for (const cplx& c : r) rsold += std::norm(c);
    std::vector<cplx> x(p.image_size(), cplx(0.0, 0.0)), ap;
    for (int it = 0; it < max_iter; ++it) {
        ap = normal_op(z);
        double pap = 0.0;
        for (size_t i = 0; i < z.size(); ++i)
            pap += (std::conj(z[i]) * ap[i]).real();
        if (pap <= 0.0) break;
        double alpha = rsold / pap;
        for (size_t i = 0; i < x.size(); ++i) {
            x[i] += alpha * z[i];
            r[i] -= alpha * ap[i];
        }
        double rsnew = 0.0;
        for (const cplx& c : r) rsnew += std::norm(c);
        res.iterations = it + 1;
        double rel = std::sqrt(rsnew) / bnorm;
        if (rel < best_rel) {
            best_rel = rel;
            best = x;
        }
        if (rel < tol) {
            res.converged = true;
            break;
        }
        double beta = rsnew / rsold;
        for (size_t i = 0; i < z.size(); ++i) z[i] = r[i] + beta * z[i];
        rsold = rsnew;
    }
    res.image = best;
    res.relative_residual = best_rel;
    return res;
}

GdReconResult recon_gd(const ReconProblem& p, LossKind loss, double lambda_tv,
                       SolverOptions solver_options) {
    p.validate();
    const size_t plane = static_cast<size_t>(p.ky) * p.kz;
    const int n = static_cast<int>(plane);
    const int n_cols = p.n_echo * p.n_coil * 2;

    // Zero-filled adjoint fixes the parameter box and the starting point.
    std::vector<cplx> zf = encode_adjoint(p.kspace, p);
    double zmax = 1e-3;
    for (const cplx& c : zf) zmax = std::max({zmax, std::abs(c.real()), std::abs(c.imag())});
    const double bound = 4.0 * zmax;

    // Measurements: per k-space point, columns (echo, coil, re/im).
    MeasuredData data;
    data.values = Matrix(n, n_cols);
    data.weights = Matrix(n, n_cols);
    for (int e = 0; e < p.n_echo; ++e) {
        const uint8_t* m = p.sampling.data() + e * plane;
        for (int c = 0; c < p.n_coil; ++c) {
            const cplx* src = p.kspace.data() + (static_cast<size_t>(e) * p.n_coil + c) * plane;
            int q = (e * p.n_coil + c) * 2;
            for (int i = 0; i < n; ++i) {
                data.values(i, q) = m[i] ? src[i].real() : 0.0;
                data.values(i, q + 1) = m[i] ? src[i].imag() : 0.0;
                data.weights(i, q) = m[i] ? 1.0 : 0.0;
                data.weights(i, q + 1) = m[i] ? 1.0 : 0.0;
            }
        }
    }

    // Real-linear DFT component maps. The unitary DFT matrix is symmetric,
    // so Re(F.) and Im(F.) restricted to real inputs are self-adjoint.
    int ky = p.ky, kz = p.kz;
    auto dft_part = [ky, kz, n](bool imag_part) {
        auto fn = [ky, kz, n, imag_part](const Matrix& in) {
            if (in.rows != n || in.cols != 1) throw ShapeError("recon dft map: bad shape");
            std::vector<cplx> buf(in.v.size());
            for (size_t i = 0; i < buf.size(); ++i) buf[i] = cplx(in.v[i], 0.0);
            std::vector<cplx> f(buf.size());
            dft2(buf.data(), f.data(), ky, kz, -1);
            Matrix out(n, 1);
            for (int i = 0; i < n; ++i) out.v[i] = imag_part ? f[i].imag() : f[i].real();
            return out;
        };
        return LinearMap{fn, fn};
    };
    LinearMap re_f = dft_part(false);
    LinearMap im_f = dft_part(true);

    Model recon_model;
    recon_model.name = "sense_encode";
    for (int e = 0; e < p.n_echo; ++e) {
        recon_model.params.push_back({"re" + std::to_string(e), -bound, bound, 0.0});
        recon_model.params.push_back({"im" + std::to_string(e), -bound, bound, 0.0});
    }
    const ReconProblem* pp = &p;
    recon_model.forward = [pp, re_f, im_f, n](Tape& t, const std::vector<Var>& vars,
                                              const Protocol&) {
        const size_t pl = static_cast<size_t>(pp->ky) * pp->kz;
        std::vector<Var> cols;
        cols.reserve(static_cast<size_t>(pp->n_echo) * pp->n_coil * 2);
        for (int e = 0; e < pp->n_echo; ++e) {
            Var xr = vars[2 * e], xi = vars[2 * e + 1];
            for (int c = 0; c < pp->n_coil; ++c) {
                Matrix cr(n, 1), ci(n, 1);
                const cplx* cm = pp->coilmaps.data() + c * pl;
                for (int i = 0; i < n; ++i) {
                    cr.v[i] = cm[i].real();
                    ci.v[i] = cm[i].imag();
                }
                Var crv = t.lift(cr, false), civ = t.lift(ci, false);
                Var ur = crv * xr - civ * xi;
                Var ui = crv * xi + civ * xr;
                Var kr = apply_linear(ur, re_f) - apply_linear(ui, im_f);
                Var ki = apply_linear(ur, im_f) + apply_linear(ui, re_f);
                cols.push_back(kr);
                cols.push_back(ki);
            }
        }
        return hconcat(cols);
    };

    // TV per echo and per component over the in-plane grid graph.
    if (lambda_tv > 0.0) {
        Mask m2d = Mask::all_true({p.ky, p.kz, 1});
        NeighborGraph g = grid_graph(m2d, GridConnectivity::four_2d);
        Regularizer reg;
        reg.kind = RegKind::tv_graph;
        reg.lambda = lambda_tv;
        reg.graph = std::move(g);
        for (int e = 0; e < p.n_echo; ++e) {
            reg.target_params.push_back("re" + std::to_string(e));
            reg.target_params.push_back("im" + std::to_string(e));
        }
        solver_options.regularizers.push_back(std::move(reg));
    }
    solver_options.lossFunction = loss;

    ParamSet x0;
    for (int e = 0; e < p.n_echo; ++e) {
        ParamSet::Entry re_e, im_e;
        re_e.name = "re" + std::to_string(e);
        im_e.name = "im" + std::to_string(e);
        re_e.lb = im_e.lb = -bound;
        re_e.ub = im_e.ub = bound;
        re_e.values.resize(n);
        im_e.values.resize(n);
        for (int i = 0; i < n; ++i) {
            re_e.values[i] = std::clamp(zf[e * plane + i].real(), -0.999 * bound, 0.999 * bound);
            im_e.values[i] = std::clamp(zf[e * plane + i].imag(), -0.999 * bound, 0.999 * bound);
        }
        x0.params.push_back(std::move(re_e));
        x0.params.push_back(std::move(im_e));
    }

    Protocol empty_prot;
    GdReconResult res;
    res.fit = fit_gd(x0, data, empty_prot, recon_model, solver_options);
    res.image.assign(p.image_size(), cplx(0.0, 0.0));
    for (int e = 0; e < p.n_echo; ++e) {
        const auto& re_e = res.fit.final.find("re" + std::to_string(e));
        const auto& im_e = res.fit.final.find("im" + std::to_string(e));
        for (int i = 0; i < n; ++i) res.image[e * plane + i] = cplx(re_e.values[i], im_e.values[i]);
    }
    return res;
}

double nrmse(const std::vector<cplx>& x, const std::vector<cplx>& ref) {
    if (x.size() != ref.size()) throw ShapeError("nrmse: size mismatch");
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        num += std::norm(x[i] - ref[i]);
        den += std::norm(ref[i]);
    }
    if (den == 0.0) throw DataError("nrmse: zero reference");
    return std::sqrt(num / den);
}

}  // namespace qfit
