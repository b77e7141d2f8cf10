#include "hyperstab/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hyperstab/controller.hpp"
#include "hyperstab/errors.hpp"
#include "hyperstab/example_system.hpp"
#include "hyperstab/kernel_nm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hyperstab {

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

/// CSV columns keyed by header name; rows are samples on a uniform x grid
/// (a single row means a constant).
struct CsvColumns {
    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;
};

CsvColumns load_csv_columns(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open csv file " + path);
    CsvColumns out;
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty csv file " + path);
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.names.push_back(cell);
    }
    out.cols.resize(out.names.size());
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(ss, cell, ',')) {
            if (c >= out.cols.size())
                throw ConfigError(path + ":" + std::to_string(lineno) + ": too many columns");
            try {
                out.cols[c].push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
            ++c;
        }
        if (c != out.cols.size())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": short row");
    }
    return out;
}

Fn1 fn_from_samples(std::vector<double> samples) {
    if (samples.empty()) throw ConfigError("empty sample column");
    if (samples.size() == 1) {
        const double c = samples[0];
        return [c](double) { return c; };
    }
    return [s = std::move(samples)](double x) { return lerp_uniform(s, 0.0, 1.0, x); };
}

Fn1 fn_from_json(const json& v, const std::string& where) {
    if (v.is_number()) {
        const double c = v.get<double>();
        return [c](double) { return c; };
    }
    if (v.is_array()) {
        std::vector<double> samples;
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError(where + ": expected numbers");
            samples.push_back(e.get<double>());
        }
        return fn_from_samples(std::move(samples));
    }
    throw ConfigError(where + ": expected a number or an array of x samples");
}

std::vector<Fn1> fn_vector(const json& v, int count, const std::string& where) {
    if (!v.is_array() || static_cast<int>(v.size()) != count)
        throw ConfigError(where + ": expected an array of length " + std::to_string(count));
    std::vector<Fn1> out;
    for (int k = 0; k < count; ++k)
        out.push_back(fn_from_json(v[static_cast<std::size_t>(k)], where + "[" + std::to_string(k + 1) + "]"));
    return out;
}

std::vector<Fn1> fns_from_csv(const std::string& path, int count, const std::string& what) {
    const auto cc = load_csv_columns(path);
    if (static_cast<int>(cc.cols.size()) != count)
        throw ConfigError(path + ": expected " + std::to_string(count) + " columns for " + what);
    std::vector<Fn1> out;
    for (const auto& col : cc.cols) out.push_back(fn_from_samples(col));
    return out;
}

DiscreteParams load_discrete(const json& plant, const std::string& cfg_dir) {
    reject_unknown_keys(plant, {"type", "n", "m", "lambda", "lambda_csv", "mu", "mu_csv", "sigma",
                                "sigma_csv", "w", "w_csv", "theta", "theta_csv", "psi", "q", "l1"},
                        "plant");
    DiscreteParams d;
    d.n = plant.value("n", 0);
    d.m = plant.value("m", 0);
    if (d.n < 1 || d.m < 1) throw ConfigError("plant.n and plant.m must be >= 1");

    auto rel = [&cfg_dir](const std::string& p) {
        return fs::path(p).is_absolute() ? p : (fs::path(cfg_dir) / p).string();
    };
    auto grid_fns = [&](const char* key, const char* csv_key, int count) {
        if (plant.contains(csv_key)) return fns_from_csv(rel(plant[csv_key].get<std::string>()), count, key);
        if (!plant.contains(key)) throw ConfigError(std::string("plant.") + key + " missing");
        return fn_vector(plant[key], count, std::string("plant.") + key);
    };

    d.lambda = grid_fns("lambda", "lambda_csv", d.n);
    d.mu = grid_fns("mu", "mu_csv", d.m);
    if (plant.contains("sigma_csv")) {
        auto flat = fns_from_csv(rel(plant["sigma_csv"].get<std::string>()), d.n * d.n, "sigma");
        d.sigma.resize(static_cast<std::size_t>(d.n));
        for (int i = 0; i < d.n; ++i)
            d.sigma[static_cast<std::size_t>(i)] =
                std::vector<Fn1>(flat.begin() + static_cast<std::ptrdiff_t>(i) * d.n,
                                 flat.begin() + static_cast<std::ptrdiff_t>(i + 1) * d.n);
    } else {
        const auto& sig = plant.at("sigma");
        if (static_cast<int>(sig.size()) != d.n) throw ConfigError("plant.sigma: expected n rows");
        for (int i = 0; i < d.n; ++i)
            d.sigma.push_back(fn_vector(sig[static_cast<std::size_t>(i)], d.n, "plant.sigma row"));
    }
    if (plant.contains("w_csv")) {
        auto flat = fns_from_csv(rel(plant["w_csv"].get<std::string>()), d.n * d.m, "w");
        d.w.resize(static_cast<std::size_t>(d.n));
        for (int i = 0; i < d.n; ++i)
            d.w[static_cast<std::size_t>(i)] =
                std::vector<Fn1>(flat.begin() + static_cast<std::ptrdiff_t>(i) * d.m,
                                 flat.begin() + static_cast<std::ptrdiff_t>(i + 1) * d.m);
    } else {
        const auto& w = plant.at("w");
        if (static_cast<int>(w.size()) != d.n) throw ConfigError("plant.w: expected n rows");
        for (int i = 0; i < d.n; ++i)
            d.w.push_back(fn_vector(w[static_cast<std::size_t>(i)], d.m, "plant.w row"));
    }
    if (plant.contains("theta_csv")) {
        auto flat = fns_from_csv(rel(plant["theta_csv"].get<std::string>()), d.m * d.n, "theta");
        d.theta.resize(static_cast<std::size_t>(d.m));
        for (int j = 0; j < d.m; ++j)
            d.theta[static_cast<std::size_t>(j)] =
                std::vector<Fn1>(flat.begin() + static_cast<std::ptrdiff_t>(j) * d.n,
                                 flat.begin() + static_cast<std::ptrdiff_t>(j + 1) * d.n);
    } else {
        const auto& th = plant.at("theta");
        if (static_cast<int>(th.size()) != d.m) throw ConfigError("plant.theta: expected m rows");
        for (int j = 0; j < d.m; ++j)
            d.theta.push_back(fn_vector(th[static_cast<std::size_t>(j)], d.n, "plant.theta row"));
    }
    {
        const auto& psi = plant.at("psi");
        if (static_cast<int>(psi.size()) != d.m) throw ConfigError("plant.psi: expected m rows");
        for (int i = 0; i < d.m; ++i)
            d.psi.push_back(fn_vector(psi[static_cast<std::size_t>(i)], d.m, "plant.psi row"));
    }
    {
        const auto& q = plant.at("q");
        if (static_cast<int>(q.size()) != d.n) throw ConfigError("plant.q: expected n rows");
        for (int i = 0; i < d.n; ++i) {
            const auto& row = q[static_cast<std::size_t>(i)];
            if (static_cast<int>(row.size()) != d.m) throw ConfigError("plant.q: expected m columns");
            d.q.push_back(row.get<std::vector<double>>());
        }
    }
    if (plant.contains("l1")) {
        const auto& l1 = plant.at("l1");
        d.l1.resize(static_cast<std::size_t>(d.m));
        for (int i = 0; i < d.m; ++i) {
            d.l1[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(d.m));
            for (int j = 0; j < i; ++j)
                d.l1[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    fn_from_json(l1[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], "plant.l1");
        }
    }
    return d;
}

} // namespace

DiscreteParams plant_of(const RunConfig& cfg, int n) {
    if (cfg.plant_type == "builtin-example") return example::discrete_params(n);
    if (!cfg.discrete) throw ConfigError("no discrete plant configured");
    if (n != cfg.discrete->n)
        throw ConfigError("configured discrete plant has n=" + std::to_string(cfg.discrete->n) +
                          ", requested n=" + std::to_string(n));
    return *cfg.discrete;
}

RunConfig parse_config(const std::string& path, const std::string& out_override,
                       int threads_override, bool verbose) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }

    reject_unknown_keys(j, {"command", "plant", "grid", "tol", "max_iter", "sim", "controller",
                            "sampling_mode", "n_list", "seed", "out", "ic_u", "ic_v"},
                        "config root");

    RunConfig cfg;
    cfg.command = j.value("command", "");
    const std::set<std::string> commands = {"validate",          "solve-kernels",
                                            "solve-nm-kernels",  "sample-gains",
                                            "simulate",          "reproduce-example",
                                            "convergence-study", "lyapunov-check"};
    if (!commands.count(cfg.command))
        throw ConfigError("unknown or missing command '" + cfg.command + "'");

    const std::string cfg_dir = fs::path(path).parent_path().string();
    if (j.contains("plant")) {
        const auto& plant = j["plant"];
        cfg.plant_type = plant.value("type", "builtin-example");
        if (cfg.plant_type == "builtin-example") {
            reject_unknown_keys(plant, {"type", "n"}, "plant");
            cfg.n = plant.value("n", 10);
        } else if (cfg.plant_type == "discrete") {
            cfg.discrete = load_discrete(plant, cfg_dir);
            cfg.n = cfg.discrete->n;
        } else {
            throw ConfigError("unknown plant.type '" + cfg.plant_type + "'");
        }
    }

    if (j.contains("grid")) {
        reject_unknown_keys(j["grid"], {"nx", "nr", "ny"}, "grid");
        cfg.solve.nx = j["grid"].value("nx", cfg.solve.nx);
        cfg.solve.nr = j["grid"].value("nr", cfg.solve.nr);
        cfg.solve.ny = j["grid"].value("ny", cfg.solve.ny);
        if (cfg.solve.nx < 8 || cfg.solve.nr < 8 || cfg.solve.ny < 8)
            throw ConfigError("grid sizes must be >= 8");
    }
    cfg.solve.tol = j.value("tol", cfg.solve.tol);
    if (!(cfg.solve.tol > 0.0)) throw ConfigError("tol must be positive");
    cfg.solve.max_iter = j.value("max_iter", cfg.solve.max_iter);

    if (j.contains("sim")) {
        reject_unknown_keys(j["sim"], {"nx", "cfl", "T", "save_stride"}, "sim");
        cfg.sim.nx = j["sim"].value("nx", cfg.sim.nx);
        cfg.sim.cfl = j["sim"].value("cfl", cfg.sim.cfl);
        cfg.sim.T = j["sim"].value("T", cfg.sim.T);
        cfg.sim.save_stride = j["sim"].value("save_stride", cfg.sim.save_stride);
        if (cfg.sim.T < 0.0) throw ConfigError("sim.T must be >= 0");
        if (!(cfg.sim.cfl > 0.0 && cfg.sim.cfl <= 1.0)) throw ConfigError("sim.cfl must be in (0,1]");
    }
    cfg.controller = j.value("controller", cfg.controller);
    if (!std::set<std::string>{"sampled", "exact", "continuum", "zero"}.count(cfg.controller))
        throw ConfigError("unknown controller '" + cfg.controller + "'");
    cfg.sampling_mode = j.value("sampling_mode", cfg.sampling_mode);
    if (!std::set<std::string>{"auto", "pointwise", "mean-value"}.count(cfg.sampling_mode))
        throw ConfigError("unknown sampling_mode '" + cfg.sampling_mode + "'");
    if (j.contains("n_list")) {
        cfg.n_list = j["n_list"].get<std::vector<int>>();
        if (cfg.n_list.empty()) throw ConfigError("n_list must not be empty");
        for (int n : cfg.n_list)
            if (n < 1) throw ConfigError("n_list entries must be >= 1");
    }
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("ic_u")) cfg.ic_u = j["ic_u"].get<double>();
    if (j.contains("ic_v")) cfg.ic_v = j["ic_v"].get<double>();
    cfg.threads = threads_override;
    cfg.solve.threads = threads_override;
    cfg.verbose = verbose;

    // run directory: explicit override, or timestamp + config hash
    std::string out_root = j.value("out", "runs");
    json echo = j;
    echo["command"] = cfg.command;
    const std::string canon = echo.dump();
    const std::uint64_t h = fnv1a(canon.data(), canon.size());
    if (!out_override.empty()) {
        cfg.out_dir = out_override;
    } else {
        std::time_t now = std::time(nullptr);
        char ts[32];
        std::strftime(ts, sizeof ts, "%Y%m%d-%H%M%S", std::gmtime(&now));
        std::ostringstream dir;
        dir << out_root << "/" << ts << "-" << std::hex << (h & 0xffffffffull) << "-" << cfg.command;
        cfg.out_dir = dir.str();
    }

    // canonical resolved echo for the manifest (excludes the directory naming)
    json resolved;
    resolved["command"] = cfg.command;
    resolved["plant"] = {{"type", cfg.plant_type}, {"n", cfg.n}};
    resolved["grid"] = {{"nx", cfg.solve.nx}, {"nr", cfg.solve.nr}, {"ny", cfg.solve.ny}};
    resolved["tol"] = cfg.solve.tol;
    resolved["max_iter"] = cfg.solve.max_iter;
    resolved["sim"] = {{"nx", cfg.sim.nx}, {"cfl", cfg.sim.cfl}, {"T", cfg.sim.T},
                       {"save_stride", cfg.sim.save_stride}};
    resolved["controller"] = cfg.controller;
    resolved["sampling_mode"] = cfg.sampling_mode;
    resolved["n_list"] = cfg.n_list;
    resolved["seed"] = cfg.seed;
    if (cfg.ic_u) resolved["ic_u"] = *cfg.ic_u;
    if (cfg.ic_v) resolved["ic_v"] = *cfg.ic_v;
    resolved["config_hash"] = h;
    cfg.resolved_json = resolved.dump(2);
    return cfg;
}

namespace {

struct Artifacts {
    std::string dir;
    std::vector<std::string> files;

    std::string path(const std::string& name) {
        files.push_back(name);
        return dir + "/" + name;
    }
};

std::uint64_t file_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::uint64_t h = 1469598103934665603ull;
    char buf[65536];
    while (is.read(buf, sizeof buf) || is.gcount() > 0) {
        h = fnv1a(buf, static_cast<std::size_t>(is.gcount()), h);
        if (!is) break;
    }
    return h;
}

void write_manifest(const RunConfig& cfg, Artifacts& art, const json& extra) {
    json manifest;
    manifest["config"] = json::parse(cfg.resolved_json);
    std::sort(art.files.begin(), art.files.end());
    json files = json::array();
    for (const auto& f : art.files) {
        std::ostringstream hh;
        hh << "fnv1a:" << std::hex << file_hash(art.dir + "/" + f);
        files.push_back({{"file", f}, {"hash", hh.str()}});
    }
    manifest["artifacts"] = files;
    for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = *it;
    std::ofstream os(art.dir + "/manifest.json");
    os << manifest.dump(2) << "\n";
}

SamplingMode resolve_mode(const RunConfig& cfg, const ContinuumKernelSet& ks) {
    if (cfg.sampling_mode == "pointwise") return SamplingMode::Pointwise;
    if (cfg.sampling_mode == "mean-value") return SamplingMode::MeanValue;
    // auto: pointwise when the tables are continuous in y
    return ks.ygrid.n_cells() == 1 ? SamplingMode::Pointwise : SamplingMode::MeanValue;
}

ContinuumParams continuum_of(const RunConfig& cfg) {
    if (cfg.plant_type == "builtin-example") return example::continuum_params();
    return lift_discrete(*cfg.discrete);
}

json validation_to_json(const ValidationReport& rep) {
    json out;
    out["pass"] = rep.pass;
    json v = json::array();
    for (const auto& viol : rep.violations)
        v.push_back({{"assumption", viol.assumption}, {"location", viol.location}, {"value", viol.value}});
    out["violations"] = v;
    return out;
}

void cmd_validate(RunConfig& cfg, Artifacts& art) {
    json out;
    if (cfg.plant_type == "builtin-example") {
        out["continuum"] = validation_to_json(validate(example::continuum_params()));
        out["discrete"] = validation_to_json(validate(example::discrete_params(cfg.n)));
    } else {
        out["discrete"] = validation_to_json(validate(*cfg.discrete));
    }
    {
        std::ofstream os(art.path("validation.json"));
        os << out.dump(2) << "\n";
    }
    bool pass = true;
    for (const auto& [k, v] : out.items()) pass = pass && v["pass"].get<bool>();
    write_manifest(cfg, art, {{"pass", pass}});
    if (!pass) throw ConfigError("plant validation failed; see validation.json");
}

void cmd_solve_kernels(RunConfig& cfg, Artifacts& art) {
    const auto P = continuum_of(cfg);
    auto ks = solve_continuum_kernels(P, cfg.solve);
    save_kernels(ks, art.dir + "/kernels");
    art.files.push_back("kernels/manifest.json");
    const auto res = kernel_residual(ks, P);
    json extra;
    extra["iterations"] = ks.iterations;
    extra["final_delta"] = ks.final_delta;
    extra["residuals"] = {{"pde_K", res.pde_K},         {"pde_L", res.pde_L},
                          {"bc_diag_K", res.bc_diag_K}, {"bc_diag_L", res.bc_diag_L},
                          {"bc_xi0", res.bc_xi0},       {"bc_x1", res.bc_x1},
                          {"cont_K", res.cont_K},       {"cont_L", res.cont_L}};
    std::ostringstream hh;
    hh << "fnv1a:" << std::hex << ks.content_hash();
    extra["kernel_table_hash"] = hh.str();
    write_manifest(cfg, art, extra);
}

void cmd_solve_nm_kernels(RunConfig& cfg, Artifacts& art) {
    const auto d = plant_of(cfg, cfg.n);
    auto nm = solve_nm_kernels(d, cfg.solve);
    save_kernels(nm.lift, art.dir + "/kernels-nm");
    art.files.push_back("kernels-nm/manifest.json");
    // l-indexed cell-value tables
    for (std::size_t s = 0; s < nm.lift.segments.size(); ++s) {
        const auto [i, p] = nm.lift.segments[s];
        std::ostringstream name;
        name << "k_i" << i + 1 << "_p" << p + 1 << ".csv";
        std::ofstream os(art.path(name.str()));
        os.precision(17);
        os << "x,xi,l,value\n";
        const SegmentGrid& g = nm.lift.K[s].g;
        for (int a = 0; a < g.nx; ++a)
            for (int b = 0; b < g.nr; ++b) {
                const double* kr = nm.k_row(static_cast<int>(s), a, b);
                for (int l = 0; l < nm.n; ++l)
                    os << g.x_of(a) << "," << g.xi_of(a, b) << "," << l + 1 << "," << kr[l] << "\n";
            }
    }
    const auto bc = nm_boundary_residual(nm, d);
    write_manifest(cfg, art,
                   {{"iterations", nm.lift.iterations},
                    {"cellwise_deviation", nm.cellwise_deviation},
                    {"bc_residuals", {{"diag", bc.diag}, {"xi0", bc.xi0}, {"isometry", bc.isometry}}}});
}

void cmd_sample_gains(RunConfig& cfg, Artifacts& art) {
    const auto P = continuum_of(cfg);
    auto ks = solve_continuum_kernels(P, cfg.solve);
    const auto mode = resolve_mode(cfg, ks);
    auto g = sample_gains(ks, cfg.n, mode);
    save_gains_csv(g, art.path("gains_k.csv"), art.path("gains_l.csv"));
    write_manifest(cfg, art,
                   {{"mode", mode == SamplingMode::Pointwise ? "pointwise" : "mean-value"},
                    {"pointwise_on_discontinuous", g.pointwise_on_discontinuous}});
}

void cmd_simulate(RunConfig& cfg, Artifacts& art) {
    const auto d = plant_of(cfg, cfg.n);
    ControllerHook hook = zero_controller(d.m);
    std::string controller_id = "zero";
    std::uint64_t kernel_hash = 0;
    if (cfg.controller != "zero") {
        const auto P = continuum_of(cfg);
        auto ks = solve_continuum_kernels(P, cfg.solve);
        kernel_hash = ks.content_hash();
        if (cfg.controller == "sampled") {
            hook = sampled_gain_controller(sample_gains(ks, cfg.n, resolve_mode(cfg, ks)));
            controller_id = "sampled";
        } else if (cfg.controller == "continuum") {
            auto op = std::make_shared<TransformOperator>(ks, cfg.n, cfg.sim.nx);
            hook = [op](const StateSnapshot& s) { return op->control(s); };
            controller_id = "continuum";
        } else {
            auto nm = solve_nm_kernels(d, cfg.solve);
            hook = sampled_gain_controller(gains_from_nm(nm));
            controller_id = "exact";
        }
    }
    std::function<double(int, double)> u0, v0;
    if (cfg.ic_u) u0 = [c = *cfg.ic_u](int, double) { return c; };
    else if (cfg.plant_type == "builtin-example")
        u0 = [&](int i, double x) { return example::initial_u(i, cfg.n, x); };
    else u0 = [](int, double) { return 1.0; };
    if (cfg.ic_v) v0 = [c = *cfg.ic_v](int, double) { return c; };
    else v0 = [&](int j, double x) { return example::initial_v(j, x); };
    auto tr = simulate(d, hook, cfg.sim, u0, v0);
    save_trajectory_csv(tr, art.path("trajectory.csv"));
    save_norms_csv(tr, {}, art.path("norms.csv"));
    save_controls_csv(tr, art.path("controls.csv"));
    std::ostringstream hh;
    hh << "fnv1a:" << std::hex << kernel_hash;
    write_manifest(cfg, art,
                   {{"controller", controller_id},
                    {"kernel_table_hash", hh.str()},
                    {"dt", tr.dt},
                    {"steps", tr.steps},
                    {"final_e_norm", tr.e_norms.back()}});
}

void cmd_reproduce_example(RunConfig& cfg, Artifacts& art) {
    const auto P = example::continuum_params();
    auto ks = solve_continuum_kernels(P, cfg.solve);
    save_kernels(ks, art.dir + "/kernels");
    art.files.push_back("kernels/manifest.json");

    // deviation from the closed-form tables
    const auto cf = example_closed_form(cfg.solve.nx, cfg.solve.nr, ks.ygrid.size());
    const auto err = kernel_sup_error(ks, cf);
    {
        std::ofstream os(art.path("kernel_error.csv"));
        os.precision(17);
        os << "nx,nr,ny,sup_K,sup_L\n";
        os << cfg.solve.nx << "," << cfg.solve.nr << "," << ks.ygrid.size() << "," << err.K << ","
           << err.L << "\n";
    }

    json gaps = json::array();
    for (int n : cfg.n_list) {
        const auto d = example::discrete_params(n);
        auto nm = solve_nm_kernels(d, cfg.solve);
        auto gains = sample_gains(ks, n, resolve_mode(cfg, ks));
        auto tr = simulate(d, sampled_gain_controller(gains), cfg.sim,
                           [&](int i, double x) { return example::initial_u(i, n, x); },
                           [&](int j, double x) { return example::initial_v(j, x); });
        // control comparison series
        std::ostringstream cname;
        cname << "controls_n" << n << ".csv";
        std::ofstream cs(art.path(cname.str()));
        cs.precision(17);
        cs << "t";
        for (int j = 0; j < d.m; ++j) cs << ",U" << j + 1;
        for (int j = 0; j < d.m; ++j) cs << ",U" << j + 1 << "_exact";
        cs << ",gap\n";
        double worst = 0.0;
        for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
            const auto Ue = eval_control_exact(nm, tr.snapshots[k].view());
            double g2 = 0.0;
            cs << tr.snapshots[k].t;
            for (double u : tr.controls[k]) cs << "," << u;
            for (std::size_t j = 0; j < Ue.size(); ++j) {
                cs << "," << Ue[j];
                g2 += (tr.controls[k][j] - Ue[j]) * (tr.controls[k][j] - Ue[j]);
            }
            cs << "," << std::sqrt(g2) << "\n";
            worst = std::max(worst, std::sqrt(g2));
        }
        std::ostringstream nname;
        nname << "norms_n" << n << ".csv";
        save_norms_csv(tr, {}, art.path(nname.str()));
        if (n == *std::max_element(cfg.n_list.begin(), cfg.n_list.end())) {
            std::ostringstream fname;
            fname << "fields_n" << n << ".csv";
            save_trajectory_csv(tr, art.path(fname.str()));
        }
        const auto gap = control_gap(gains, nm);
        gaps.push_back({{"n", n},
                        {"max_control_gap", worst},
                        {"aggregate_coefficient", gap.max_aggregate},
                        {"e_ratio", tr.e_norms.back() / tr.e_norms.front()}});
    }
    {
        std::ofstream os(art.path("gaps.csv"));
        os.precision(17);
        os << "n,max_control_gap,aggregate_coefficient,e_ratio\n";
        for (const auto& g : gaps)
            os << g["n"].get<int>() << "," << g["max_control_gap"].get<double>() << ","
               << g["aggregate_coefficient"].get<double>() << "," << g["e_ratio"].get<double>() << "\n";
    }
    std::ostringstream hh;
    hh << "fnv1a:" << std::hex << ks.content_hash();
    write_manifest(cfg, art,
                   {{"kernel_sup_error", {{"K", err.K}, {"L", err.L}}},
                    {"kernel_table_hash", hh.str()},
                    {"gaps", gaps}});
}

void cmd_convergence_study(RunConfig& cfg, Artifacts& art) {
    if (cfg.plant_type != "builtin-example")
        throw ConfigError("convergence-study supports the builtin example family");
    ConvergenceOptions co;
    co.sim = cfg.sim;
    auto rep = convergence_study(
        [](int n) { return example::discrete_params(n); }, cfg.n_list,
        [](int n, int i, double x) { return example::initial_u(i, n, x); },
        [](int j, double x) { return example::initial_v(j, x); }, zero_controller(2), co);
    {
        std::ofstream os(art.path("convergence.csv"));
        os.precision(17);
        os << "n,distance,resampled\n";
        for (std::size_t k = 0; k < rep.n_list.size(); ++k)
            os << rep.n_list[k] << "," << rep.distances[k] << "," << (rep.resampled[k] ? 1 : 0) << "\n";
    }
    write_manifest(cfg, art,
                   {{"n_ref", rep.n_ref}, {"ratio_last_first", rep.ratio_last_first}});
}

void cmd_lyapunov_check(RunConfig& cfg, Artifacts& art) {
    if (cfg.plant_type != "builtin-example")
        throw ConfigError("lyapunov-check supports the builtin example plant");
    const auto P = example::continuum_params();
    auto ks = solve_continuum_kernels(P, cfg.solve);
    CouplingOptions co;
    co.nxy = 65;
    auto ct = solve_coupling_C(ks, P, co);
    auto b = compute_bounds(P, &ks, &ct);
    auto lp = choose_lyapunov_params(b, P.m);

    const auto d = example::discrete_params(cfg.n);
    auto op = std::make_shared<TransformOperator>(ks, cfg.n, cfg.sim.nx);
    auto tr = simulate(d, [op](const StateSnapshot& s) { return op->control(s); }, cfg.sim,
                       [&](int i, double x) { return example::initial_u(i, cfg.n, x); },
                       [&](int j, double x) { return example::initial_v(j, x); });
    std::vector<double> V;
    for (const auto& s : tr.snapshots) V.push_back(lyapunov_value(op->apply(s), lp, P, cfg.n));
    save_norms_csv(tr, V, art.path("norms.csv"));

    // exponential envelope fit on the tail
    double rate = 0.0;
    {
        std::vector<double> ts, lv;
        for (std::size_t k = 0; k < V.size(); ++k)
            if (tr.snapshots[k].t >= 1.0 && V[k] > 0.0) {
                ts.push_back(tr.snapshots[k].t);
                lv.push_back(std::log(V[k]));
            }
        if (ts.size() >= 2) {
            double st = 0, sl = 0, stt = 0, stl = 0;
            for (std::size_t k = 0; k < ts.size(); ++k) {
                st += ts[k];
                sl += lv[k];
                stt += ts[k] * ts[k];
                stl += ts[k] * lv[k];
            }
            const double nn = static_cast<double>(ts.size());
            rate = (nn * stl - st * sl) / (nn * stt - st * st);
        }
    }
    bool monotone = true;
    const double floor_tol = V.empty() ? 0.0 : 1e-12 * V.front();
    for (std::size_t k = 1; k < V.size(); ++k)
        if (tr.snapshots[k].t >= 1.0 && tr.snapshots[k - 1].t >= 1.0 && V[k] > V[k - 1] + floor_tol)
            monotone = false;

    json bounds = {{"m_lambda", b.m_lambda}, {"m_mu", b.m_mu},         {"M_lambda", b.M_lambda},
                   {"M_mu", b.M_mu},         {"M_sigma", b.M_sigma},   {"M_W", b.M_W},
                   {"M_theta", b.M_theta},   {"M_psi", b.M_psi},       {"M_Q", b.M_Q},
                   {"M_Q1", b.M_Q1},         {"M_lambda1", b.M_lambda1}, {"M_mu1", b.M_mu1},
                   {"M_B", b.M_B},           {"eps", b.eps},           {"M_lambda_eps", b.M_lambda_eps},
                   {"M_mu_eps", b.M_mu_eps}, {"M", b.M},               {"M_KL", b.M_KL},
                   {"M_L", b.M_L},           {"M_Cplus", b.M_Cplus},   {"M_Cminus", b.M_Cminus},
                   {"M_G", b.M_G}};
    // seeded random-state round-trip diagnostic of the transform pair
    double roundtrip = 0.0;
    {
        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> amp(-1.0, 1.0);
        for (int trial = 0; trial < 5; ++trial) {
            StateSnapshot s;
            s.n = cfg.n;
            s.m = P.m;
            s.nx = cfg.sim.nx;
            s.u.resize(static_cast<std::size_t>(s.n) * s.nx);
            s.v.resize(static_cast<std::size_t>(s.m) * s.nx);
            for (int i = 0; i < s.n; ++i) {
                const double a = amp(rng), bq = amp(rng);
                for (int g = 0; g < s.nx; ++g) {
                    const double x = static_cast<double>(g) / (s.nx - 1);
                    s.u[static_cast<std::size_t>(i) * s.nx + g] = a + bq * std::sin(3.0 * x);
                }
            }
            for (int j = 0; j < s.m; ++j) {
                const double a = amp(rng), bq = amp(rng);
                for (int g = 0; g < s.nx; ++g) {
                    const double x = static_cast<double>(g) / (s.nx - 1);
                    s.v[static_cast<std::size_t>(j) * s.nx + g] = a * std::cos(2.0 * x) + bq * x;
                }
            }
            auto back = op->invert(op->apply(s));
            double err = 0.0, scale = 1e-12;
            for (std::size_t k = 0; k < s.v.size(); ++k) {
                err = std::max(err, std::abs(back.v[k] - s.v[k]));
                scale = std::max(scale, std::abs(s.v[k]));
            }
            roundtrip = std::max(roundtrip, err / scale);
        }
    }

    json lyap = {{"delta", lp.delta}, {"D", lp.D}, {"c_V", lp.c_V}, {"F", lp.F},
                 {"envelope_rate", rate}, {"monotone_after_settle", monotone},
                 {"roundtrip_rel_err", roundtrip}};
    {
        std::ofstream os(art.path("lyapunov.json"));
        os << json({{"bounds", bounds}, {"parameters", lyap}}).dump(2) << "\n";
    }
    write_manifest(cfg, art, {{"envelope_rate", rate},
                              {"monotone_after_settle", monotone},
                              {"roundtrip_rel_err", roundtrip}});
}

} // namespace

void run(RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    Artifacts art{cfg.out_dir, {}};
    if (cfg.command == "validate") cmd_validate(cfg, art);
    else if (cfg.command == "solve-kernels") cmd_solve_kernels(cfg, art);
    else if (cfg.command == "solve-nm-kernels") cmd_solve_nm_kernels(cfg, art);
    else if (cfg.command == "sample-gains") cmd_sample_gains(cfg, art);
    else if (cfg.command == "simulate") cmd_simulate(cfg, art);
    else if (cfg.command == "reproduce-example") cmd_reproduce_example(cfg, art);
    else if (cfg.command == "convergence-study") cmd_convergence_study(cfg, art);
    else if (cfg.command == "lyapunov-check") cmd_lyapunov_check(cfg, art);
    else throw ConfigError("unknown command " + cfg.command);
}

} // namespace hyperstab
