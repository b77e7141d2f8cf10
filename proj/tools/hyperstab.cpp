#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hyperstab/errors.hpp"
#include "hyperstab/run_config.hpp"

using nlohmann::json;

namespace {

void emit_error(const std::string& type, const std::string& message, const std::string& out_dir) {
    json err = {{"error", {{"type", type}, {"message", message}}}};
    std::cerr << err.dump() << std::endl;
    if (!out_dir.empty()) {
        std::ofstream os(out_dir + "/error.json");
        if (os) os << err.dump(2) << "\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"backstepping kernel computation, gain sampling, and closed-loop verification"};
    std::string config_path;
    std::string out_dir;
    int threads = 0;
    bool verbose = false;
    app.add_option("--config", config_path, "run configuration (JSON)")->required();
    app.add_option("--out", out_dir, "run directory (default: runs/<timestamp>-<hash>-<command>)");
    app.add_option("--threads", threads, "worker threads (default: HYPERSTAB_THREADS or hardware)");
    app.add_flag("--verbose", verbose, "progress output");
    CLI11_PARSE(app, argc, argv);

    hyperstab::RunConfig cfg;
    try {
        cfg = hyperstab::parse_config(config_path, out_dir, threads, verbose);
    } catch (const hyperstab::ConfigError& e) {
        emit_error("config", e.what(), "");
        return 2;
    } catch (const std::exception& e) {
        emit_error("config", e.what(), "");
        return 2;
    }

    try {
        if (verbose) std::cout << "run directory: " << cfg.out_dir << "\n";
        hyperstab::run(cfg);
    } catch (const hyperstab::ConvergenceError& e) {
        emit_error("non-convergence", e.what(), cfg.out_dir);
        return 3;
    } catch (const hyperstab::BlowupError& e) {
        emit_error("blow-up", e.what(), cfg.out_dir);
        return 4;
    } catch (const hyperstab::ConfigError& e) {
        emit_error("config", e.what(), cfg.out_dir);
        return 2;
    } catch (const std::exception& e) {
        emit_error("internal", e.what(), cfg.out_dir);
        return 1;
    }
    if (verbose) std::cout << "ok\n";
    return 0;
}
