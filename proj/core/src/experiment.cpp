// SPDX-License-Identifier: Apache-2.0
#include "pipesim/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pipesim/trace.hpp"

namespace pipesim {

namespace {

using json = nlohmann::ordered_json;

void require_object(const json& j, const std::string& section) {
    if (!j.is_object()) throw ConfigError("config: section '" + section + "' must be an object");
}

void reject_unknown(const json& j, const std::string& section,
                    std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end())
            throw ConfigError("config: unknown key '" + section + "." + key + "'");
    }
}

template <typename T>
T get_field(const json& j, const std::string& section, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value for '" + section + "." + std::string(key) + "'");
    }
}

StrategyKind parse_kind(const std::string& name) {
    if (name == "standard") return StrategyKind::Standard;
    if (name == "cpu_only") return StrategyKind::CpuOnly;
    if (name == "naive") return StrategyKind::Naive;
    if (name == "superpipeline") return StrategyKind::Superpipeline;
    throw ConfigError("config: unknown strategy kind '" + name + "'");
}

TransferMode parse_transfer_mode(const std::string& name) {
    if (name == "batch") return TransferMode::Batch;
    if (name == "sequential") return TransferMode::Sequential;
    throw ConfigError("config: unknown transfer_mode '" + name + "'");
}

SweepObjective parse_objective(const std::string& name) {
    if (name == "min_per_item_time") return SweepObjective::MinPerItemTime;
    if (name == "min_peak_bytes") return SweepObjective::MinPeakBytes;
    if (name == "min_time_under_budget") return SweepObjective::MinTimeUnderBudget;
    throw ConfigError("config: unknown objective '" + name + "'");
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << body;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::filesystem::path prepare_output_dir(const ExperimentConfig& cfg) {
    std::filesystem::path dir = output_dir(cfg);
    std::filesystem::create_directories(dir);
    return dir;
}

bool wants_format(const ExperimentConfig& cfg, const std::string& fmt) {
    return std::find(cfg.output.formats.begin(), cfg.output.formats.end(), fmt) !=
           cfg.output.formats.end();
}

RunResult execute(const ExperimentConfig& cfg, const LayeredModel& model,
                  const StrategyConfig& strategy) {
    if (cfg.workload.mode == "train") {
        Tensor x = make_input(model.seed, 0, cfg.workload.batch_size, model.d);
        Tensor target = make_input(model.seed, 1, cfg.workload.batch_size, model.d);
        TrainConfig train_cfg;
        train_cfg.lr = cfg.workload.lr;
        train_cfg.checkpointing = cfg.workload.checkpointing;
        train_cfg.batch_size = cfg.workload.batch_size;
        return run_train_step(model, x, target, strategy, cfg.arena, train_cfg);
    }
    std::vector<Tensor> inputs;
    inputs.reserve(static_cast<std::size_t>(cfg.workload.n_items));
    for (int i = 0; i < cfg.workload.n_items; ++i)
        inputs.push_back(make_input(model.seed, static_cast<std::uint64_t>(i),
                                    cfg.workload.batch_size, model.d));
    return run_inference(model, inputs, strategy, cfg.arena);
}

void print_summary_line(const RunSummary& s) {
    std::cout << "strategy=" << s.strategy << " k=" << s.k << " k_prime=" << s.k_prime
              << " peak_bytes=" << s.peak_bytes << " per_item_time=" << format_double(s.per_item_time)
              << " stall=" << format_double(s.total_stall_time) << " digest=" << s.output_digest;
    if (s.has_loss) std::cout << " loss=" << format_double(static_cast<double>(s.loss));
    std::cout << "\n";
}

}  // namespace

void ExperimentConfig::validate() const {
    if (model.n_layers < 1) throw ConfigError("config: model.n_layers must be >= 1");
    if (model.d < 1) throw ConfigError("config: model.d must be >= 1");
    if (model.frozen_prefix < 0 || model.frozen_prefix > model.n_layers)
        throw ConfigError("config: model.frozen_prefix must be in [0, n_layers]");
    if (workload.mode != "infer" && workload.mode != "train")
        throw ConfigError("config: workload.mode must be 'infer' or 'train'");
    if (workload.n_items < 1) throw ConfigError("config: workload.n_items must be >= 1");
    if (workload.batch_size < 1) throw ConfigError("config: workload.batch_size must be >= 1");
    if (workload.lr <= 0.0f) throw ConfigError("config: workload.lr must be > 0");
    for (const auto& fmt : output.formats)
        if (fmt != "csv" && fmt != "json")
            throw ConfigError("config: output.formats entries must be 'csv' or 'json'");
    try {
        arena.validate();
        strategy.validate(model.n_layers);
        if (sweep) sweep->validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: parse error in '" + path + "': " + e.what());
    }
    require_object(j, "<root>");
    reject_unknown(j, "<root>", {"model", "arena", "workload", "strategy", "output", "sweep"});

    ExperimentConfig cfg;
    if (j.contains("model")) {
        const auto& m = j.at("model");
        require_object(m, "model");
        reject_unknown(m, "model", {"seed", "n_layers", "d", "frozen_prefix"});
        cfg.model.seed = get_field<std::uint64_t>(m, "model", "seed", cfg.model.seed);
        cfg.model.n_layers = get_field<int>(m, "model", "n_layers", cfg.model.n_layers);
        cfg.model.d = get_field<int>(m, "model", "d", cfg.model.d);
        cfg.model.frozen_prefix = get_field<int>(m, "model", "frozen_prefix", 0);
    }
    if (j.contains("arena")) {
        const auto& a = j.at("arena");
        require_object(a, "arena");
        reject_unknown(a, "arena",
                       {"capacity_bytes", "h2d_bandwidth", "d2h_bandwidth", "per_call_latency",
                        "device_compute_rate", "host_compute_rate"});
        cfg.arena.capacity_bytes =
            get_field<std::uint64_t>(a, "arena", "capacity_bytes", cfg.arena.capacity_bytes);
        cfg.arena.h2d_bandwidth = get_field<double>(a, "arena", "h2d_bandwidth", 1.0);
        cfg.arena.d2h_bandwidth = get_field<double>(a, "arena", "d2h_bandwidth", 1.0);
        cfg.arena.per_call_latency = get_field<double>(a, "arena", "per_call_latency", 0.0);
        cfg.arena.device_compute_rate = get_field<double>(a, "arena", "device_compute_rate", 1.0);
        cfg.arena.host_compute_rate = get_field<double>(a, "arena", "host_compute_rate", 1.0);
    }
    if (j.contains("workload")) {
        const auto& w = j.at("workload");
        require_object(w, "workload");
        reject_unknown(w, "workload", {"mode", "n_items", "batch_size", "lr", "checkpointing"});
        cfg.workload.mode = get_field<std::string>(w, "workload", "mode", cfg.workload.mode);
        cfg.workload.n_items = get_field<int>(w, "workload", "n_items", cfg.workload.n_items);
        cfg.workload.batch_size =
            get_field<std::int64_t>(w, "workload", "batch_size", cfg.workload.batch_size);
        cfg.workload.lr = get_field<float>(w, "workload", "lr", cfg.workload.lr);
        cfg.workload.checkpointing = get_field<bool>(w, "workload", "checkpointing", false);
    }
    if (j.contains("strategy")) {
        const auto& s = j.at("strategy");
        require_object(s, "strategy");
        reject_unknown(s, "strategy", {"kind", "k", "k_prime", "transfer_mode"});
        cfg.strategy.kind = parse_kind(get_field<std::string>(s, "strategy", "kind", "standard"));
        cfg.strategy.k = get_field<int>(s, "strategy", "k", 0);
        cfg.strategy.k_prime = get_field<int>(s, "strategy", "k_prime", 0);
        cfg.strategy.transfer_mode =
            parse_transfer_mode(get_field<std::string>(s, "strategy", "transfer_mode", "batch"));
    }
    if (j.contains("output")) {
        const auto& o = j.at("output");
        require_object(o, "output");
        reject_unknown(o, "output", {"dir", "formats"});
        if (o.contains("dir")) cfg.output.dir = get_field<std::string>(o, "output", "dir", "out");
        cfg.output.formats =
            get_field<std::vector<std::string>>(o, "output", "formats", cfg.output.formats);
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        require_object(s, "sweep");
        reject_unknown(s, "sweep",
                       {"k_min", "k_max", "k_prime_min", "k_prime_max", "budget_bytes",
                        "objective"});
        SweepSpec spec;
        spec.k_min = get_field<int>(s, "sweep", "k_min", spec.k_min);
        spec.k_max = get_field<int>(s, "sweep", "k_max", spec.k_max);
        spec.k_prime_min = get_field<int>(s, "sweep", "k_prime_min", spec.k_prime_min);
        spec.k_prime_max = get_field<int>(s, "sweep", "k_prime_max", spec.k_prime_max);
        spec.budget_bytes = get_field<std::uint64_t>(s, "sweep", "budget_bytes", 0);
        spec.objective = parse_objective(
            get_field<std::string>(s, "sweep", "objective", "min_time_under_budget"));
        cfg.sweep = spec;
    }
    return cfg;
}

std::string output_dir(const ExperimentConfig& cfg) {
    if (cfg.output.dir) return *cfg.output.dir;
    if (const char* env = std::getenv("PIPESIM_OUTPUT_DIR"); env && *env) return env;
    return "out";
}

int cmd_run(const ExperimentConfig& cfg) {
    cfg.validate();
    LayeredModel model =
        build_model(cfg.model.seed, cfg.model.n_layers, cfg.model.d, cfg.model.frozen_prefix);
    RunResult result;
    try {
        result = execute(cfg, model, cfg.strategy);
    } catch (const OomDeadlockError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    auto dir = prepare_output_dir(cfg);
    if (wants_format(cfg, "csv")) export_trace_csv(result.trace, (dir / "trace.csv").string());
    if (wants_format(cfg, "json"))
        write_text((dir / "summary.json").string(), summary_to_json(result.summary) + "\n");
    print_summary_line(result.summary);
    return 0;
}

int cmd_compare(const ExperimentConfig& cfg) {
    cfg.validate();
    StrategyConfig superpipe = cfg.strategy;
    superpipe.kind = StrategyKind::Superpipeline;
    try {
        superpipe.validate(cfg.model.n_layers);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    std::vector<StrategyConfig> strategies;
    for (StrategyKind kind : {StrategyKind::Standard, StrategyKind::CpuOnly, StrategyKind::Naive,
                              StrategyKind::Superpipeline}) {
        StrategyConfig s = superpipe;
        s.kind = kind;
        strategies.push_back(s);
    }

    LayeredModel model =
        build_model(cfg.model.seed, cfg.model.n_layers, cfg.model.d, cfg.model.frozen_prefix);
    std::vector<RunSummary> rows;
    for (const auto& strategy : strategies) {
        RunResult result;
        try {
            result = execute(cfg, model, strategy);
        } catch (const OomDeadlockError& e) {
            std::cerr << "error: " << to_string(strategy.kind) << ": " << e.what() << "\n";
            return 3;
        }
        rows.push_back(result.summary);
    }
    for (const auto& row : rows)
        if (row.output_digest != rows.front().output_digest) {
            std::cerr << "error: digest mismatch between " << rows.front().strategy << " and "
                      << row.strategy << "\n";
            return 4;
        }

    std::string csv = "Method,PeakBytes,PerItemTime,K,K'\n";
    for (const auto& row : rows) {
        csv += row.strategy + "," + std::to_string(row.peak_bytes) + "," +
               format_double(row.per_item_time) + "," + std::to_string(row.k) + "," +
               std::to_string(row.k_prime) + "\n";
        print_summary_line(row);
    }
    auto dir = prepare_output_dir(cfg);
    if (wants_format(cfg, "csv")) write_text((dir / "compare.csv").string(), csv);
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    if (!cfg.sweep) throw ConfigError("config: sweep section required for the sweep command");
    LayeredModel model =
        build_model(cfg.model.seed, cfg.model.n_layers, cfg.model.d, cfg.model.frozen_prefix);
    SweepWorkload workload;
    workload.n_items = cfg.workload.n_items;
    workload.batch_size = cfg.workload.batch_size;
    workload.transfer_mode = cfg.strategy.transfer_mode;
    SweepResult result;
    try {
        result = grid_search(model, cfg.arena, workload, *cfg.sweep);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    std::string csv = "k,k_prime,feasible,peak_bytes,per_item_time\n";
    for (const auto& entry : result.table)
        csv += std::to_string(entry.k) + "," + std::to_string(entry.k_prime) + "," +
               (entry.feasible ? "1" : "0") + "," + std::to_string(entry.peak_bytes) + "," +
               format_double(entry.per_item_time) + "\n";
    auto dir = prepare_output_dir(cfg);
    if (wants_format(cfg, "csv")) write_text((dir / "sweep.csv").string(), csv);

    if (result.best)
        std::cout << "best k=" << result.best->first << " k_prime=" << result.best->second << "\n";
    else
        std::cout << "none feasible\n";
    return 0;
}

}  // namespace pipesim
