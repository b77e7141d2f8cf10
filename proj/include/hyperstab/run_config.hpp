#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hyperstab/kernel_solver.hpp"
#include "hyperstab/params.hpp"
#include "hyperstab/simulator.hpp"

namespace hyperstab {

/// Parsed and default-resolved run description. The resolved JSON echo goes
/// into the run manifest so artifacts are reproducible from the manifest
/// alone.
struct RunConfig {
    std::string command;

    std::string plant_type = "builtin-example"; ///< or "discrete"
    int n = 10;                                 ///< rightward rows where needed
    std::optional<DiscreteParams> discrete;     ///< loaded user plant

    SolveOptions solve;
    SimOptions sim;
    std::string controller = "sampled"; ///< sampled | exact | continuum | zero
    std::string sampling_mode = "auto"; ///< auto | pointwise | mean-value
    std::vector<int> n_list = {2, 6, 10};
    std::uint64_t seed = 0;
    std::optional<double> ic_u; ///< constant initial data overrides
    std::optional<double> ic_v;

    std::string out_dir; ///< resolved run directory
    int threads = 0;
    bool verbose = false;

    std::string resolved_json; ///< canonical echo of every resolved field
};

/// Loads and validates a JSON config. Unknown keys are rejected. `out_override`
/// and `threads_override` come from the command line.
RunConfig parse_config(const std::string& path, const std::string& out_override = "",
                       int threads_override = 0, bool verbose = false);

/// Executes the configured pipeline, writing artifacts and a manifest into
/// the run directory. Throws ConfigError / ConvergenceError / BlowupError.
void run(RunConfig& cfg);

/// Discrete plant of the configured run (builtin family or user data).
DiscreteParams plant_of(const RunConfig& cfg, int n);

} // namespace hyperstab
