#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hyperstab/errors.hpp"
#include "hyperstab/run_config.hpp"

using namespace hyperstab;
namespace fs = std::filesystem;

namespace {

std::string write_config(const std::string& name, const std::string& body) {
    const auto dir = fs::temp_directory_path() / "hyperstab_cli_test";
    fs::create_directories(dir);
    const auto path = dir / name;
    std::ofstream os(path);
    os << body;
    return path.string();
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("minimal config resolves documented defaults") {
    auto cfg = parse_config(write_config("min.json", R"({"command":"validate"})"));
    CHECK(cfg.command == "validate");
    CHECK(cfg.plant_type == "builtin-example");
    CHECK(cfg.solve.nx == 129);
    CHECK(cfg.solve.nr == 129);
    CHECK(cfg.solve.ny == 65);
    CHECK(cfg.solve.tol == doctest::Approx(1e-8));
    CHECK(cfg.solve.max_iter == 200);
    CHECK(cfg.sim.nx == 256);
    CHECK(cfg.sim.cfl == doctest::Approx(0.5));
    CHECK(cfg.n_list == std::vector<int>{2, 6, 10});
}

TEST_CASE("unknown keys are rejected") {
    CHECK_THROWS_AS(parse_config(write_config("typo.json", R"({"command":"validate","toll":1e-8})")),
                    ConfigError);
    CHECK_THROWS_AS(
        parse_config(write_config("typo2.json", R"({"command":"validate","grid":{"nz":9}})")),
        ConfigError);
}

TEST_CASE("malformed numerics and bad values are rejected") {
    CHECK_THROWS_AS(parse_config(write_config("tol.json", R"({"command":"validate","tol":-1})")),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(write_config("bad.json", R"({"command":"validate", "tol": })")),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(write_config("cmd.json", R"({"command":"fly"})")), ConfigError);
    CHECK_THROWS_AS(parse_config(write_config("nl.json", R"({"command":"validate","n_list":[]})")),
                    ConfigError);
}

TEST_CASE("n_list parses for the study commands") {
    auto cfg = parse_config(write_config("nls.json", R"({"command":"validate","n_list":[2,6,10]})"));
    CHECK(cfg.n_list == std::vector<int>{2, 6, 10});
}

TEST_CASE("validate pipeline writes a manifest and passes") {
    auto cfg = parse_config(write_config("v.json", R"({"command":"validate"})"),
                            (fs::temp_directory_path() / "hyperstab_run_v").string());
    run(cfg);
    CHECK(fs::exists(cfg.out_dir + "/manifest.json"));
    CHECK(fs::exists(cfg.out_dir + "/validation.json"));
}

TEST_CASE("inline discrete plant round trips and validates") {
    const std::string body = R"({
      "command": "validate",
      "plant": {
        "type": "discrete", "n": 2, "m": 2,
        "lambda": [1.0, 1.0],
        "mu": [2.0, 1.0],
        "sigma": [[0.0, 0.0], [0.0, 0.0]],
        "w": [[0.1, 0.1], [0.2, 0.2]],
        "theta": [[0.3, 0.4], [0.5, 0.6]],
        "psi": [[0.0, 0.0], [0.0, 0.0]],
        "q": [[1.0, 2.0], [3.0, 4.0]]
      }
    })";
    auto cfg = parse_config(write_config("d.json", body),
                            (fs::temp_directory_path() / "hyperstab_run_d").string());
    REQUIRE(cfg.discrete.has_value());
    CHECK(cfg.discrete->lambda[0](0.5) == doctest::Approx(1.0));
    CHECK(cfg.discrete->q[1][0] == doctest::Approx(3.0));
    run(cfg);
}

TEST_CASE("csv plant columns become x-sampled functions") {
    const auto dir = fs::temp_directory_path() / "hyperstab_cli_test";
    fs::create_directories(dir);
    {
        std::ofstream os(dir / "lambda.csv");
        os << "1,2\n1.0,2.0\n3.0,4.0\n";
    }
    const std::string body = R"({
      "command": "validate",
      "plant": {
        "type": "discrete", "n": 2, "m": 1,
        "lambda_csv": "lambda.csv",
        "mu": [1.0],
        "sigma": [[0.0, 0.0], [0.0, 0.0]],
        "w": [[0.0], [0.0]],
        "theta": [[0.0, 0.0]],
        "psi": [[0.0]],
        "q": [[1.0], [1.0]]
      }
    })";
    auto cfg = parse_config(write_config("csvplant.json", body));
    REQUIRE(cfg.discrete.has_value());
    CHECK(cfg.discrete->lambda[0](0.0) == doctest::Approx(1.0));
    CHECK(cfg.discrete->lambda[0](1.0) == doctest::Approx(3.0));
    CHECK(cfg.discrete->lambda[1](0.5) == doctest::Approx(3.0));
}

TEST_CASE("failing plant validation exits through the config error path") {
    const std::string body = R"({
      "command": "validate",
      "plant": {
        "type": "discrete", "n": 1, "m": 2,
        "lambda": [1.0],
        "mu": [1.0, 1.0],
        "sigma": [[0.0]],
        "w": [[0.0, 0.0]],
        "theta": [[0.0], [0.0]],
        "psi": [[0.0, 0.0], [0.0, 0.0]],
        "q": [[0.0, 0.0]]
      }
    })";
    auto cfg = parse_config(write_config("badplant.json", body),
                            (fs::temp_directory_path() / "hyperstab_run_bad").string());
    CHECK_THROWS_AS(run(cfg), ConfigError);
}

TEST_CASE("simulate with zero horizon saves exactly the initial snapshot") {
    const std::string body = R"({
      "command": "simulate",
      "plant": {"type": "builtin-example", "n": 2},
      "grid": {"nx": 17, "nr": 17, "ny": 9},
      "sim": {"nx": 32, "T": 0.0},
      "controller": "zero"
    })";
    auto cfg = parse_config(write_config("t0.json", body),
                            (fs::temp_directory_path() / "hyperstab_run_t0").string());
    run(cfg);
    std::ifstream is(cfg.out_dir + "/trajectory.csv");
    int rows = 0;
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2); // header + initial state
}

TEST_CASE("identical configs rerun to byte-identical artifacts") {
    const std::string body = R"({
      "command": "simulate",
      "plant": {"type": "builtin-example", "n": 2},
      "grid": {"nx": 17, "nr": 17, "ny": 9},
      "sim": {"nx": 48, "T": 0.3, "save_stride": 8},
      "controller": "sampled"
    })";
    auto run_dir = [&](const std::string& tag) {
        auto cfg = parse_config(write_config("det.json", body),
                                (fs::temp_directory_path() / ("hyperstab_det_" + tag)).string());
        run(cfg);
        return cfg.out_dir;
    };
    const auto d1 = run_dir("a");
    const auto d2 = run_dir("b");
    for (const char* f : {"manifest.json", "norms.csv", "trajectory.csv", "controls.csv"})
        CHECK(slurp(d1 + "/" + f) == slurp(d2 + "/" + f));
}

TEST_CASE("every artifact is referenced by the manifest") {
    const std::string body = R"({
      "command": "sample-gains",
      "plant": {"type": "builtin-example", "n": 3},
      "grid": {"nx": 17, "nr": 17, "ny": 9}
    })";
    auto cfg = parse_config(write_config("gains.json", body),
                            (fs::temp_directory_path() / "hyperstab_run_g").string());
    run(cfg);
    const std::string manifest = slurp(cfg.out_dir + "/manifest.json");
    for (const auto& entry : fs::directory_iterator(cfg.out_dir)) {
        const auto name = entry.path().filename().string();
        if (name == "manifest.json") continue;
        CHECK(manifest.find(name) != std::string::npos);
    }
}
