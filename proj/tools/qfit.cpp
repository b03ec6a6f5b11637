#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "qfit/bench.hpp"
#include "qfit/gradcheck.hpp"
#include "qfit/io.hpp"
#include "qfit/mcmc.hpp"
#include "qfit/model.hpp"
#include "qfit/nlls.hpp"
#include "qfit/recon.hpp"
#include "qfit/simulate.hpp"
#include "qfit/solver.hpp"

using json = nlohmann::json;
using namespace qfit;

namespace {

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid config JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    return j;
}

// flag wins if the user passed it, else the config key, else the default
// already stored in the variable
template <typename T>
void merge(const CLI::App* cmd, const std::string& flag, const json& cfg, const std::string& key,
           T& value) {
    if (cmd->count(flag) > 0) return;
    if (cfg.contains(key)) {
        try {
            value = cfg.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key '" + key + "' has the wrong type");
        }
    }
}

LossKind parse_loss(const std::string& s) {
    if (s == "l1") return LossKind::l1;
    if (s == "l2") return LossKind::l2;
    throw ConfigError("lossFunction must be l1 or l2");
}

OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgdm") return OptimizerKind::sgdm;
    if (s == "rmsprop") return OptimizerKind::rmsprop;
    throw ConfigError("optimizer must be adam, sgdm, or rmsprop");
}

struct LoadedData {
    MeasuredData data;
    Mask mask;        // grid geometry for outputs; all-true 1D when no mask
    bool packed = true;
};

std::vector<int64_t> packed_cells(const Mask& mask) {
    std::vector<int64_t> cells;
    for (size_t c = 0; c < mask.n_cells(); ++c)
        if (mask.inside[c]) cells.push_back(static_cast<int64_t>(c));
    return cells;
}

LoadedData load_fit_data(const std::string& data_path, const std::string& mask_path,
                         bool optimise_memory) {
    Volume vol = read_nifti(data_path);
    LoadedData out;
    if (mask_path.empty()) {
        out.mask = Mask::all_true(vol.dims);
    } else {
        out.mask = read_mask_nifti(mask_path);
        if (out.mask.dims != vol.dims) throw ShapeError("mask dims do not match data dims");
    }
    if (optimise_memory || mask_path.empty()) {
        out.data = pack(vol, out.mask);
        out.packed = true;
    } else {
        // full-grid evaluation: every cell is a sample, out-of-mask cells
        // get zero weight
        Mask full = Mask::all_true(vol.dims);
        out.data = pack(vol, full);
        out.data.weights = Matrix(out.data.values.rows, out.data.values.cols, 1.0);
        for (size_t c = 0; c < out.mask.n_cells(); ++c)
            if (!out.mask.inside[c])
                for (int j = 0; j < out.data.values.cols; ++j)
                    out.data.weights(static_cast<int>(c), j) = 0.0;
        out.packed = false;
    }
    return out;
}

void write_param_map(const std::string& path, const std::vector<double>& values,
                     const LoadedData& ld) {
    Matrix col = Matrix::column(values);
    Mask geom = ld.packed ? ld.mask : Mask::all_true(ld.mask.dims);
    Volume vol = unpack(col, geom, 0.0);
    if (!ld.packed)
        for (size_t c = 0; c < ld.mask.n_cells(); ++c)
            if (!ld.mask.inside[c]) vol.v[c] = 0.0;
    write_nifti(path, vol);
}

NeighborGraph tv_graph_for(const LoadedData& ld, GridConnectivity conn) {
    NeighborGraph g = grid_graph(ld.mask, conn);
    if (ld.packed) return g;
    // full-grid samples: remap packed in-mask node ids to grid cell ids
    std::vector<int64_t> cells = packed_cells(ld.mask);
    NeighborGraph out;
    out.n_nodes = static_cast<int>(ld.mask.n_cells());
    out.edges.reserve(g.edges.size());
    for (auto [i, j] : g.edges)
        out.edges.emplace_back(static_cast<int>(cells[i]), static_cast<int>(cells[j]));
    return out;
}

std::vector<Regularizer> parse_regularizers(const json& cfg, const LoadedData& ld) {
    std::vector<Regularizer> regs;
    if (cfg.contains("tv")) {
        const json& tv = cfg.at("tv");
        Regularizer r;
        r.kind = RegKind::tv_graph;
        r.lambda = tv.value("lambda", 0.001);
        for (const auto& p : tv.value("params", std::vector<std::string>{}))
            r.target_params.push_back(p);
        std::string conn = tv.value("connectivity", std::string("six_3d"));
        GridConnectivity gc;
        if (conn == "four_2d") gc = GridConnectivity::four_2d;
        else if (conn == "six_3d") gc = GridConnectivity::six_3d;
        else throw ConfigError("tv.connectivity must be four_2d or six_3d");
        r.graph = tv_graph_for(ld, gc);
        regs.push_back(std::move(r));
    }
    if (cfg.contains("prior")) {
        const json& pr = cfg.at("prior");
        Regularizer r;
        r.kind = RegKind::prior;
        r.lambda = pr.value("lambda", 1e-4);
        for (const auto& p : pr.value("params", std::vector<std::string>{}))
            r.target_params.push_back(p);
        r.mu = pr.value("mu", std::vector<double>{});
        r.sigma = pr.value("sigma", std::vector<double>{});
        if (pr.at("mu").is_number()) r.mu = {pr.at("mu").get<double>()};
        if (pr.at("sigma").is_number()) r.sigma = {pr.at("sigma").get<double>()};
        regs.push_back(std::move(r));
    }
    return regs;
}

ParamSet initial_params(const Model& model, int n, const json& cfg) {
    ParamSet x0;
    json x0cfg = cfg.value("x0", json::object());
    json lbcfg = cfg.value("lb", json::object());
    json ubcfg = cfg.value("ub", json::object());
    for (const auto& pd : model.params) {
        ParamSet::Entry e;
        e.name = pd.name;
        e.lb = lbcfg.value(pd.name, pd.lb);
        e.ub = ubcfg.value(pd.name, pd.ub);
        double init = x0cfg.value(pd.name, pd.init);
        if (!(e.lb < e.ub)) throw ConfigError("lb must be < ub for '" + pd.name + "'");
        init = std::clamp(init, e.lb + 1e-6 * (e.ub - e.lb), e.ub - 1e-6 * (e.ub - e.lb));
        e.values.assign(n, init);
        x0.params.push_back(std::move(e));
    }
    return x0;
}

int run_simulate(const std::string& config_path, const CLI::App* cmd, std::string model_name,
                 std::string protocol_path, std::string out_prefix, std::string mask_path, int n,
                 double snr, std::string noise, uint64_t seed) {
    json cfg = load_config(config_path);
    merge(cmd, "--model", cfg, "model", model_name);
    merge(cmd, "--protocol", cfg, "protocol", protocol_path);
    merge(cmd, "--mask", cfg, "mask", mask_path);
    merge(cmd, "--n", cfg, "n", n);
    merge(cmd, "--snr", cfg, "snr", snr);
    merge(cmd, "--noise", cfg, "noise", noise);
    merge(cmd, "--seed", cfg, "seed", seed);

    const Model& model = get_model(model_name);
    Protocol prot =
        protocol_path.empty() ? default_protocol(model_name) : read_protocol_json(protocol_path);

    Mask mask;
    if (!mask_path.empty()) {
        mask = read_mask_nifti(mask_path);
        n = mask.n_inside();
    } else {
        mask = Mask::all_true({n, 1, 1});
    }
    NoiseKind nk;
    if (noise == "gaussian") nk = NoiseKind::gaussian;
    else if (noise == "rician") nk = NoiseKind::rician;
    else throw ConfigError("noise must be gaussian or rician");

    ParamSet truth = default_truth(model, n, seed);
    MeasuredData data = simulate(model, truth, prot, snr, nk, seed);

    write_nifti(out_prefix + "_data.nii", unpack(data.values, mask, 0.0));
    for (const auto& e : truth.params)
        write_nifti(out_prefix + "_truth_" + e.name + ".nii",
                    unpack(Matrix::column(e.values), mask, 0.0));
    if (protocol_path.empty()) write_protocol_json(out_prefix + "_protocol.json", prot);
    std::printf("simulate: %d samples, %d measurements, model %s\n", data.n_samples(),
                data.n_meas(), model_name.c_str());
    return 0;
}

int run_fit(const std::string& config_path, const CLI::App* cmd, std::string model_name,
            std::string data_path, std::string mask_path, std::string protocol_path,
            std::string solver, std::string out_prefix, uint64_t seed) {
    json cfg = load_config(config_path);
    merge(cmd, "--model", cfg, "model", model_name);
    merge(cmd, "--data", cfg, "data", data_path);
    merge(cmd, "--mask", cfg, "mask", mask_path);
    merge(cmd, "--protocol", cfg, "protocol", protocol_path);
    merge(cmd, "--solver", cfg, "solver", solver);
    merge(cmd, "--seed", cfg, "seed", seed);
    if (model_name.empty() || data_path.empty() || protocol_path.empty() || out_prefix.empty())
        throw ConfigError("fit: model, data, protocol, and out are required");

    const Model& model = get_model(model_name);
    Protocol prot = read_protocol_json(protocol_path);
    bool optimise_memory = cfg.value("isOptimiseMemory", true);
    LoadedData ld = load_fit_data(data_path, mask_path, optimise_memory);
    const int n = ld.data.n_samples();
    ParamSet x0 = initial_params(model, n, cfg);

    if (solver == "adam" || solver == "sgdm" || solver == "rmsprop") {
        SolverOptions opt;
        opt.optimizer = parse_optimizer(solver);
        opt.iteration = cfg.value("iteration", opt.iteration);
        opt.initialLearnRate = cfg.value("initialLearnRate", opt.initialLearnRate);
        opt.lossFunction = parse_loss(cfg.value("lossFunction", std::string("l1")));
        opt.tol = cfg.value("tol", opt.tol);
        opt.convergenceValue = cfg.value("convergenceValue", opt.convergenceValue);
        opt.convergenceWindow = cfg.value("convergenceWindow", opt.convergenceWindow);
        opt.seed = seed;
        opt.regularizers = parse_regularizers(cfg, ld);
        FitResult res = fit_gd(x0, ld.data, prot, model, opt);
        for (const auto& e : res.final.params)
            write_param_map(out_prefix + "_" + e.name + ".nii", e.values, ld);
        std::vector<std::vector<double>> rows;
        for (size_t i = 0; i < res.loss_history.size(); ++i)
            rows.push_back({static_cast<double>(i + 1), res.loss_history[i]});
        write_csv(out_prefix + "_loss.csv", {"iteration", "loss"}, rows);
        const char* why = res.stop_reason == StopReason::tol          ? "tol"
                          : res.stop_reason == StopReason::max_iter   ? "max_iter"
                          : res.stop_reason == StopReason::converged  ? "converged"
                                                                      : "diverged";
        std::printf("fit: %d iterations, stop=%s, best loss %.8g\n", res.iterations_run, why,
                    res.best_loss);
        return 0;
    }

    if (solver == "mh" || solver == "ensemble") {
        McmcOptions opt;
        opt.algorithm = solver == "mh" ? McmcAlgo::mh : McmcAlgo::ensemble;
        opt.iteration = cfg.value("iteration", opt.iteration);
        opt.burnin = cfg.value("burnin", opt.burnin);
        opt.thinning = cfg.value("thinning", opt.thinning);
        opt.Nwalker = cfg.value("Nwalker", opt.Nwalker);
        opt.StepSize = cfg.value("StepSize", opt.StepSize);
        opt.repetition = cfg.value("repetition", opt.repetition);
        opt.seed = seed;
        if (cfg.contains("xStepSize"))
            for (auto it = cfg["xStepSize"].begin(); it != cfg["xStepSize"].end(); ++it)
                opt.xStepSize[it.key()] = it.value().get<double>();
        ParamSet::Entry noise;
        noise.name = "noise";
        json nb = cfg.value("noise_bounds", json::array({0.001, 0.1}));
        noise.lb = nb[0].get<double>();
        noise.ub = nb[1].get<double>();
        noise.values.assign(n, 0.5 * (noise.lb + noise.ub));
        x0.params.push_back(std::move(noise));
        PosteriorSummary s = mcmc_run(x0, ld.data, prot, model, opt);
        for (size_t p = 0; p < s.names.size(); ++p) {
            std::vector<double> m(n), sd(n);
            for (int i = 0; i < n; ++i) {
                m[i] = s.mean(i, static_cast<int>(p));
                sd[i] = s.stdev(i, static_cast<int>(p));
            }
            write_param_map(out_prefix + "_" + s.names[p] + "_mean.nii", m, ld);
            write_param_map(out_prefix + "_" + s.names[p] + "_std.nii", sd, ld);
        }
        double acc = 0.0;
        for (double a : s.acceptance_rate) acc += a;
        std::printf("fit: %s, %d retained draws per chain, mean acceptance %.3f\n",
                    solver.c_str(), s.n_retained, acc / n);
        return 0;
    }

    if (solver == "nlls_oracle") {
        NllsOptions opt;
        opt.seed = seed;
        opt.max_iter = cfg.value("iteration", opt.max_iter);
        NllsResult res = nlls_fit(x0, ld.data, prot, model, opt);
        for (const auto& e : res.final.params)
            write_param_map(out_prefix + "_" + e.name + ".nii", e.values, ld);
        int conv = 0;
        for (uint8_t c : res.converged) conv += c;
        std::printf("fit: nlls_oracle, %d/%d samples converged\n", conv, n);
        return 0;
    }
    throw ConfigError("unknown solver '" + solver + "'");
}

int run_recon(const std::string& config_path, const CLI::App* cmd, std::string kspace_path,
              std::string kspace_sidecar, std::string coil_path, std::string coil_sidecar,
              std::string method, int Rz, int z_shift, int te_shift, double lambda_tv,
              double lambda, std::string loss, int iteration, double lr,
              std::string out_prefix) {
    json cfg = load_config(config_path);
    merge(cmd, "--kspace", cfg, "kspace", kspace_path);
    merge(cmd, "--kspace-sidecar", cfg, "kspace_sidecar", kspace_sidecar);
    merge(cmd, "--coilmaps", cfg, "coilmaps", coil_path);
    merge(cmd, "--coilmaps-sidecar", cfg, "coilmaps_sidecar", coil_sidecar);
    merge(cmd, "--method", cfg, "method", method);
    merge(cmd, "--Rz", cfg, "Rz", Rz);
    merge(cmd, "--z-shift", cfg, "z_shift", z_shift);
    merge(cmd, "--te-shift", cfg, "te_shift", te_shift);
    merge(cmd, "--lambda-tv", cfg, "lambda_tv", lambda_tv);
    merge(cmd, "--lambda", cfg, "lambda", lambda);
    merge(cmd, "--loss", cfg, "lossFunction", loss);
    merge(cmd, "--iteration", cfg, "iteration", iteration);
    merge(cmd, "--lr", cfg, "initialLearnRate", lr);
    if (kspace_path.empty() || coil_path.empty() || out_prefix.empty())
        throw ConfigError("recon: kspace, coilmaps, and out are required");
    if (kspace_sidecar.empty()) kspace_sidecar = kspace_path + ".json";
    if (coil_sidecar.empty()) coil_sidecar = coil_path + ".json";

    ComplexArray ks = read_complex64(kspace_path, kspace_sidecar);
    ComplexArray cm = read_complex64(coil_path, coil_sidecar);
    ReconProblem p;
    p.ky = ks.shape[0];
    p.kz = ks.shape[1];
    p.n_coil = ks.shape[2];
    p.n_echo = ks.shape[3];
    if (cm.shape[0] != p.ky || cm.shape[1] != p.kz || cm.shape[2] != p.n_coil ||
        cm.shape[3] != 1)
        throw ShapeError("recon: coil map shape must be [ky, kz, coil, 1]");
    const size_t plane = static_cast<size_t>(p.ky) * p.kz;
    p.kspace.resize(p.kspace_size());
    for (int y = 0; y < p.ky; ++y)
        for (int z = 0; z < p.kz; ++z)
            for (int c = 0; c < p.n_coil; ++c)
                for (int e = 0; e < p.n_echo; ++e)
                    p.kspace[(static_cast<size_t>(e) * p.n_coil + c) * plane +
                             static_cast<size_t>(y) * p.kz + z] =
                        ks.v[((static_cast<size_t>(y) * p.kz + z) * p.n_coil + c) * p.n_echo + e];
    p.coilmaps.resize(static_cast<size_t>(p.n_coil) * plane);
    for (int y = 0; y < p.ky; ++y)
        for (int z = 0; z < p.kz; ++z)
            for (int c = 0; c < p.n_coil; ++c)
                p.coilmaps[c * plane + static_cast<size_t>(y) * p.kz + z] =
                    cm.v[((static_cast<size_t>(y) * p.kz + z) * p.n_coil + c)];
    p.sampling = caipi_mask(p.ky, p.kz, Rz, z_shift, te_shift, p.n_echo);
    p.lambda_tv = lambda_tv;

    std::vector<cplx> image;
    if (method == "lsqr") {
        LsqrResult r = recon_lsqr(p, lambda, iteration);
        std::printf("recon: lsqr, %d iterations, relative residual %.3g\n", r.iterations,
                    r.relative_residual);
        image = std::move(r.image);
    } else if (method == "gd") {
        SolverOptions opt;
        opt.iteration = iteration;
        opt.initialLearnRate = lr;
        GdReconResult r = recon_gd(p, parse_loss(loss), lambda_tv, opt);
        std::printf("recon: gd, %d iterations, best loss %.8g\n", r.fit.iterations_run,
                    r.fit.best_loss);
        image = std::move(r.image);
    } else {
        throw ConfigError("recon: method must be gd or lsqr");
    }

    Volume re, im;
    re.dims = im.dims = {p.ky, p.kz, 1};
    re.n_meas = im.n_meas = p.n_echo;
    re.v.resize(image.size());
    im.v.resize(image.size());
    for (int e = 0; e < p.n_echo; ++e)
        for (size_t i = 0; i < plane; ++i) {
            re.v[i * p.n_echo + e] = image[e * plane + i].real();
            im.v[i * p.n_echo + e] = image[e * plane + i].imag();
        }
    write_nifti(out_prefix + "_real.nii", re);
    write_nifti(out_prefix + "_imag.nii", im);
    return 0;
}

int run_bench(const std::string& config_path, const CLI::App* cmd, std::string model_name,
              std::string protocol_path, std::vector<int> counts, std::vector<std::string> solvers,
              int repeats, double snr, uint64_t seed, std::string out_path) {
    json cfg = load_config(config_path);
    merge(cmd, "--model", cfg, "model", model_name);
    merge(cmd, "--protocol", cfg, "protocol", protocol_path);
    merge(cmd, "--repeats", cfg, "repeats", repeats);
    merge(cmd, "--snr", cfg, "snr", snr);
    merge(cmd, "--seed", cfg, "seed", seed);
    if (model_name.empty() || out_path.empty())
        throw ConfigError("bench: model and out are required");

    const Model& model = get_model(model_name);
    BenchOptions opt;
    if (!counts.empty()) opt.sample_counts = counts;
    if (!solvers.empty()) opt.solvers = solvers;
    opt.repeats = repeats;
    opt.snr = snr;
    opt.seed = seed;
    opt.gd.iteration = cfg.value("iteration", 200);
    opt.mcmc.iteration = cfg.value("mcmc_iteration", 2000);
    Protocol prot =
        protocol_path.empty() ? default_protocol(model_name) : read_protocol_json(protocol_path);
    BenchReport rep = bench_scaling(model, prot, opt);
    write_bench_csv(out_path, rep);
    for (const auto& r : rep.rows)
        std::printf("%s n=%d rep=%d wall=%.4gs per_sample=%.4gus%s\n", r.solver.c_str(), r.count,
                    r.repeat, r.wall_s, r.per_sample_s * 1e6, r.extrapolated ? " (extrap)" : "");
    return 0;
}

int run_gradcheck(std::string model_name, int points, std::string loss, double tol,
                  uint64_t seed) {
    std::vector<std::string> names =
        model_name == "all" ? model_names() : std::vector<std::string>{model_name};
    double worst = 0.0;
    for (const auto& nm : names) {
        Protocol prot = default_protocol(nm);
        GradCheckResult r = gradcheck_model(get_model(nm), prot, parse_loss(loss), points, seed);
        std::printf("gradcheck %-14s max rel err %.3g over %d coordinates\n", nm.c_str(),
                    r.max_rel_err, r.n_checked);
        worst = std::max(worst, r.max_rel_err);
    }
    for (auto [kind, label] : {std::pair{RegKind::tv_graph, "tv_graph"},
                               std::pair{RegKind::prior, "prior"}}) {
        GradCheckResult r = gradcheck_regularizer(kind, points, seed);
        std::printf("gradcheck %-14s max rel err %.3g over %d coordinates\n", label,
                    r.max_rel_err, r.n_checked);
        worst = std::max(worst, r.max_rel_err);
    }
    if (worst >= tol)
        throw NumericalError("gradient check failed: max rel err " + std::to_string(worst));
    return 0;
}

int run_graph(std::string mask_path, std::string mesh_path, std::string connectivity,
              std::string out_path) {
    NeighborGraph g;
    if (!mesh_path.empty()) {
        g = read_mesh_json(mesh_path);
    } else if (!mask_path.empty()) {
        Mask m = read_mask_nifti(mask_path);
        GridConnectivity gc;
        if (connectivity == "four_2d") gc = GridConnectivity::four_2d;
        else if (connectivity == "six_3d") gc = GridConnectivity::six_3d;
        else throw ConfigError("connectivity must be four_2d or six_3d");
        g = grid_graph(m, gc);
    } else {
        throw ConfigError("graph: need --mask or --mesh");
    }
    std::printf("graph: %d nodes, %zu edges\n", g.n_nodes, g.edges.size());
    if (!out_path.empty()) {
        json j;
        j["n_vertices"] = g.n_nodes;
        json edges = json::array();
        for (auto [i, k] : g.edges) edges.push_back(json::array({i, k}));
        j["edges"] = std::move(edges);
        std::ofstream f(out_path);
        if (!f) throw DataError("cannot write file: " + out_path);
        f << j.dump(2) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Batched voxelwise parameter estimation for nonlinear signal models"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its keys");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate synthetic data");
    sim->fallthrough();
    std::string sim_model = "monoexp", sim_prot, sim_out = "sim", sim_mask,
                sim_noise = "gaussian";
    int sim_n = 100;
    double sim_snr = 50.0;
    uint64_t sim_seed = 0;
    sim->add_option("--model", sim_model, "Model name");
    sim->add_option("--protocol", sim_prot, "Protocol JSON (default: built-in)");
    sim->add_option("--out", sim_out, "Output prefix");
    sim->add_option("--mask", sim_mask, "Mask NIfTI (samples = in-mask voxels)");
    sim->add_option("--n", sim_n, "Sample count when no mask is given");
    sim->add_option("--snr", sim_snr, "Signal-to-noise ratio");
    sim->add_option("--noise", sim_noise, "gaussian | rician");
    sim->add_option("--seed", sim_seed, "RNG seed");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a model to measured data");
    fit->fallthrough();
    std::string fit_model, fit_data, fit_mask, fit_prot, fit_solver = "adam", fit_out = "fit";
    uint64_t fit_seed = 0;
    fit->add_option("--model", fit_model, "Model name");
    fit->add_option("--data", fit_data, "Measured data NIfTI");
    fit->add_option("--mask", fit_mask, "Mask NIfTI");
    fit->add_option("--protocol", fit_prot, "Protocol JSON");
    fit->add_option("--solver", fit_solver, "adam | sgdm | rmsprop | mh | ensemble | nlls_oracle");
    fit->add_option("--out", fit_out, "Output prefix");
    fit->add_option("--seed", fit_seed, "RNG seed");

    // recon
    auto* rec = app.add_subcommand("recon", "SENSE reconstruction from undersampled k-space");
    rec->fallthrough();
    std::string rec_ks, rec_ks_sc, rec_cm, rec_cm_sc, rec_method = "gd", rec_loss = "l2",
                rec_out = "recon";
    int rec_rz = 1, rec_zshift = 0, rec_teshift = 0, rec_iter = 500;
    double rec_ltv = 0.0, rec_lambda = 1e-4, rec_lr = 0.05;
    rec->add_option("--kspace", rec_ks, "Raw complex64 k-space");
    rec->add_option("--kspace-sidecar", rec_ks_sc, "Shape sidecar (default <kspace>.json)");
    rec->add_option("--coilmaps", rec_cm, "Raw complex64 coil maps");
    rec->add_option("--coilmaps-sidecar", rec_cm_sc, "Shape sidecar (default <coilmaps>.json)");
    rec->add_option("--method", rec_method, "gd | lsqr");
    rec->add_option("--Rz", rec_rz, "Undersampling factor");
    rec->add_option("--z-shift", rec_zshift, "Per-row sampling shift");
    rec->add_option("--te-shift", rec_teshift, "Per-echo sampling shift");
    rec->add_option("--lambda-tv", rec_ltv, "TV weight (gd)");
    rec->add_option("--lambda", rec_lambda, "Tikhonov weight (lsqr)");
    rec->add_option("--loss", rec_loss, "l1 | l2 (gd)");
    rec->add_option("--iteration", rec_iter, "Max iterations");
    rec->add_option("--lr", rec_lr, "Learning rate (gd)");
    rec->add_option("--out", rec_out, "Output prefix");

    // bench
    auto* ben = app.add_subcommand("bench", "Timing and scaling harness");
    ben->fallthrough();
    std::string ben_model = "monoexp", ben_prot, ben_out = "bench.csv";
    std::vector<int> ben_counts;
    std::vector<std::string> ben_solvers;
    int ben_repeats = 3;
    double ben_snr = 50.0;
    uint64_t ben_seed = 0;
    ben->add_option("--model", ben_model, "Model name");
    ben->add_option("--protocol", ben_prot, "Protocol JSON (default: built-in)");
    ben->add_option("--counts", ben_counts, "Ascending sample counts");
    ben->add_option("--solvers", ben_solvers, "adam | mh | ensemble | nlls_oracle");
    ben->add_option("--repeats", ben_repeats, "Repeats per point");
    ben->add_option("--snr", ben_snr, "Simulated SNR");
    ben->add_option("--seed", ben_seed, "RNG seed");
    ben->add_option("--out", ben_out, "Output CSV");

    // gradcheck
    auto* grc = app.add_subcommand("gradcheck", "Compare gradients to finite differences");
    grc->fallthrough();
    std::string grc_model = "all", grc_loss = "l1";
    int grc_points = 200;
    double grc_tol = 1e-5;
    uint64_t grc_seed = 0;
    grc->add_option("--model", grc_model, "Model name or 'all'");
    grc->add_option("--points", grc_points, "Random points per model");
    grc->add_option("--loss", grc_loss, "l1 | l2");
    grc->add_option("--tol", grc_tol, "Failure threshold on relative error");
    grc->add_option("--seed", grc_seed, "RNG seed");

    // graph
    auto* grp = app.add_subcommand("graph", "Build or inspect a neighbor graph");
    grp->fallthrough();
    std::string grp_mask, grp_mesh, grp_conn = "six_3d", grp_out;
    grp->add_option("--mask", grp_mask, "Mask NIfTI (grid graph)");
    grp->add_option("--mesh", grp_mesh, "Mesh JSON (vertex graph)");
    grp->add_option("--connectivity", grp_conn, "four_2d | six_3d");
    grp->add_option("--out", grp_out, "Write edges as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sim->parsed())
            return run_simulate(config_path, sim, sim_model, sim_prot, sim_out, sim_mask, sim_n,
                                sim_snr, sim_noise, sim_seed);
        if (fit->parsed())
            return run_fit(config_path, fit, fit_model, fit_data, fit_mask, fit_prot, fit_solver,
                           fit_out, fit_seed);
        if (rec->parsed())
            return run_recon(config_path, rec, rec_ks, rec_ks_sc, rec_cm, rec_cm_sc, rec_method,
                             rec_rz, rec_zshift, rec_teshift, rec_ltv, rec_lambda, rec_loss,
                             rec_iter, rec_lr, rec_out);
        if (ben->parsed())
            return run_bench(config_path, ben, ben_model, ben_prot, ben_counts, ben_solvers,
                             ben_repeats, ben_snr, ben_seed, ben_out);
        if (grc->parsed())
            return run_gradcheck(grc_model, grc_points, grc_loss, grc_tol, grc_seed);
        if (grp->parsed()) return run_graph(grp_mask, grp_mesh, grp_conn, grp_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 4;
    }
    return 0;
}
