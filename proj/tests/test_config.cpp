// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pipesim/experiment.hpp"

using namespace pipesim;
namespace fs = std::filesystem;

namespace {

std::string config_dir() { return PIPESIM_CONFIG_DIR; }

std::string write_temp(const std::string& name, const std::string& body) {
    std::ofstream out(name);
    out << body;
    return name;
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(PIPESIM_CLI_PATH) + " " + args +
                      " > cli_stdout.txt 2> cli_stderr.txt";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

TEST_CASE("default config loads with the expected values") {
    ExperimentConfig cfg = load_config(config_dir() + "/default.json");
    CHECK(cfg.model.seed == 7);
    CHECK(cfg.model.n_layers == 8);
    CHECK(cfg.model.d == 16);
    CHECK(cfg.arena.d2h_bandwidth == 100.0);
    CHECK(cfg.arena.h2d_bandwidth == 200.0);
    CHECK(cfg.workload.mode == "infer");
    CHECK(cfg.workload.n_items == 4);
    CHECK(cfg.strategy.kind == StrategyKind::Superpipeline);
    CHECK(cfg.strategy.k == 4);
    CHECK(cfg.strategy.k_prime == 2);
    REQUIRE(cfg.sweep.has_value());
    CHECK(cfg.sweep->k_max == 8);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("unknown keys are rejected at every level") {
    auto path = write_temp("cfg_unknown_root.json", R"({"modell": {}})");
    CHECK_THROWS_AS(load_config(path), ConfigError);
    path = write_temp("cfg_unknown_nested.json", R"({"model": {"layers": 4}})");
    CHECK_THROWS_AS(load_config(path), ConfigError);
    path = write_temp("cfg_unknown_strategy.json", R"({"strategy": {"kind": "naive", "K": 2}})");
    CHECK_THROWS_AS(load_config(path), ConfigError);
}

TEST_CASE("malformed values are config errors") {
    auto path = write_temp("cfg_bad_type.json", R"({"model": {"n_layers": "eight"}})");
    CHECK_THROWS_AS(load_config(path), ConfigError);
    path = write_temp("cfg_bad_kind.json", R"({"strategy": {"kind": "turbo"}})");
    CHECK_THROWS_AS(load_config(path), ConfigError);
    path = write_temp("cfg_bad_json.json", "{not json");
    CHECK_THROWS_AS(load_config(path), ConfigError);
    CHECK_THROWS_AS(load_config("missing_file.json"), ConfigError);
}

TEST_CASE("validation enforces cross-field invariants") {
    ExperimentConfig cfg = load_config(config_dir() + "/default.json");
    cfg.strategy.k_prime = 4;  // k' == k
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = load_config(config_dir() + "/default.json");
    cfg.workload.mode = "predict";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = load_config(config_dir() + "/default.json");
    cfg.model.frozen_prefix = 9;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = load_config(config_dir() + "/default.json");
    cfg.output.formats = {"yaml"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("output dir resolution: explicit, then env, then default") {
    ExperimentConfig cfg;
    unsetenv("PIPESIM_OUTPUT_DIR");
    CHECK(output_dir(cfg) == "out");
    setenv("PIPESIM_OUTPUT_DIR", "env_dir", 1);
    CHECK(output_dir(cfg) == "env_dir");
    cfg.output.dir = "explicit_dir";
    CHECK(output_dir(cfg) == "explicit_dir");
    unsetenv("PIPESIM_OUTPUT_DIR");
}

TEST_CASE("cli run writes artifacts and exits 0") {
    fs::remove_all("cli_out_run");
    int rc = run_cli("run -c " + config_dir() + "/default.json -o cli_out_run");
    CHECK(rc == 0);
    CHECK(fs::exists("cli_out_run/trace.csv"));
    CHECK(fs::exists("cli_out_run/summary.json"));
    std::string line = slurp("cli_stdout.txt");
    CHECK(line.find("strategy=superpipeline") != std::string::npos);
    CHECK(line.find("digest=") != std::string::npos);
}

TEST_CASE("cli rejects invalid window parameters with exit 2 and no files") {
    fs::remove_all("cli_out_bad");
    int rc = run_cli("run -c " + config_dir() + "/default.json -o cli_out_bad --subwindow 5");
    CHECK(rc == 2);
    CHECK_FALSE(fs::exists("cli_out_bad"));
    CHECK(slurp("cli_stderr.txt").find("error:") != std::string::npos);
}

TEST_CASE("cli reports oom-deadlock with exit 3") {
    fs::remove_all("cli_out_oom");
    int rc = run_cli("run -c " + config_dir() + "/default.json -o cli_out_oom --capacity 100");
    CHECK(rc == 3);
    CHECK_FALSE(fs::exists("cli_out_oom/trace.csv"));
}

TEST_CASE("cli exits 2 on a missing config file or unknown flag") {
    CHECK(run_cli("run -c does_not_exist.json") == 2);
    CHECK(run_cli("run -c " + config_dir() + "/default.json --bogus-flag 1") == 2);
    CHECK(run_cli("frobnicate -c " + config_dir() + "/default.json") == 2);
}

TEST_CASE("repeated cli runs produce byte-identical artifacts") {
    fs::remove_all("cli_det_a");
    fs::remove_all("cli_det_b");
    REQUIRE(run_cli("run -c " + config_dir() + "/default.json -o cli_det_a") == 0);
    REQUIRE(run_cli("run -c " + config_dir() + "/default.json -o cli_det_b") == 0);
    CHECK(slurp("cli_det_a/trace.csv") == slurp("cli_det_b/trace.csv"));
    CHECK(slurp("cli_det_a/summary.json") == slurp("cli_det_b/summary.json"));
}

TEST_CASE("cli compare emits the four-strategy table in fixed order") {
    fs::remove_all("cli_out_cmp");
    int rc = run_cli("compare -c " + config_dir() + "/default.json -o cli_out_cmp");
    CHECK(rc == 0);
    std::string csv = slurp("cli_out_cmp/compare.csv");
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "Method,PeakBytes,PerItemTime,K,K'");
    std::getline(in, line);
    CHECK(line.rfind("standard,", 0) == 0);
    std::getline(in, line);
    CHECK(line.rfind("cpu_only,", 0) == 0);
    std::getline(in, line);
    CHECK(line.rfind("naive,", 0) == 0);
    std::getline(in, line);
    CHECK(line.rfind("superpipeline,", 0) == 0);
    CHECK_FALSE(std::getline(in, line));
}

TEST_CASE("cli sweep writes the table and prints a best pair") {
    fs::remove_all("cli_out_sweep");
    int rc = run_cli("sweep -c " + config_dir() + "/default.json -o cli_out_sweep --k 2:4");
    CHECK(rc == 0);
    std::string csv = slurp("cli_out_sweep/sweep.csv");
    CHECK(csv.rfind("k,k_prime,feasible,peak_bytes,per_item_time\n", 0) == 0);
    CHECK(slurp("cli_stdout.txt").find("best k=") != std::string::npos);

    // Budget below one layer: still exit 0, explicitly no feasible point.
    int rc2 = run_cli("sweep -c " + config_dir() + "/default.json -o cli_out_sweep --budget 10");
    CHECK(rc2 == 0);
    CHECK(slurp("cli_stdout.txt").find("none feasible") != std::string::npos);
}

TEST_CASE("cli train completes the shipped windowed config but ooms standard") {
    fs::remove_all("cli_out_train");
    int rc = run_cli("train -c " + config_dir() + "/oom_train.json -o cli_out_train");
    CHECK(rc == 0);
    CHECK(slurp("cli_stdout.txt").find("loss=") != std::string::npos);
    int rc_std = run_cli("train -c " + config_dir() + "/oom_train.json -o cli_out_train_std "
                         "--strategy standard");
    CHECK(rc_std == 3);
}

TEST_CASE("env var sets the output dir when nothing else does") {
    fs::remove_all("cli_env_dir");
    setenv("PIPESIM_OUTPUT_DIR", "cli_env_dir", 1);
    int rc = run_cli("run -c " + config_dir() + "/default.json");
    unsetenv("PIPESIM_OUTPUT_DIR");
    CHECK(rc == 0);
    CHECK(fs::exists("cli_env_dir/trace.csv"));
}
