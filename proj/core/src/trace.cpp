// SPDX-License-Identifier: Apache-2.0
#include "pipesim/trace.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pipesim {

namespace {

using json = nlohmann::ordered_json;

std::string join_layers(const std::vector<int>& layers) {
    std::string out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (i) out += '+';
        out += std::to_string(layers[i]);
    }
    return out;
}

std::vector<int> split_layers(const std::string& s) {
    std::vector<int> layers;
    std::size_t pos = 0;
    while (pos < s.size()) {
        auto next = s.find('+', pos);
        if (next == std::string::npos) next = s.size();
        layers.push_back(std::stoi(s.substr(pos, next - pos)));
        pos = next + 1;
    }
    return layers;
}

std::vector<std::pair<std::string, std::string>> parse_kv(const std::string& detail) {
    std::vector<std::pair<std::string, std::string>> kv;
    std::size_t pos = 0;
    while (pos < detail.size()) {
        auto next = detail.find(';', pos);
        if (next == std::string::npos) next = detail.size();
        auto field = detail.substr(pos, next - pos);
        auto eq = field.find('=');
        if (eq == std::string::npos) throw std::runtime_error("trace: malformed detail field");
        kv.emplace_back(field.substr(0, eq), field.substr(eq + 1));
        pos = next + 1;
    }
    return kv;
}

TraceEvent::Kind kind_from_name(const std::string& name) {
    if (name == "Compute") return TraceEvent::Kind::Compute;
    if (name == "H2D") return TraceEvent::Kind::H2D;
    if (name == "D2H") return TraceEvent::Kind::D2H;
    if (name == "Stall") return TraceEvent::Kind::Stall;
    throw std::runtime_error("trace: unknown event kind '" + name + "'");
}

json event_to_json(const TraceEvent& ev) {
    json j;
    j["t_start"] = ev.t_start;
    j["t_end"] = ev.t_end;
    j["kind"] = kind_name(ev.kind);
    j["detail"] = event_detail(ev);
    j["resident_bytes"] = ev.resident_bytes_after;
    j["weight_bytes"] = ev.footprint_after.weight_bytes;
    j["activation_bytes"] = ev.footprint_after.activation_bytes;
    j["gradient_bytes"] = ev.footprint_after.gradient_bytes;
    return j;
}

}  // namespace

std::string kind_name(TraceEvent::Kind kind) {
    switch (kind) {
        case TraceEvent::Kind::Compute: return "Compute";
        case TraceEvent::Kind::H2D: return "H2D";
        case TraceEvent::Kind::D2H: return "D2H";
        case TraceEvent::Kind::Stall: return "Stall";
    }
    return "?";
}

std::string event_detail(const TraceEvent& ev) {
    std::string out;
    switch (ev.kind) {
        case TraceEvent::Kind::Compute:
            out = "item=" + std::to_string(ev.item) + ";layer=" + std::to_string(ev.layer) +
                  ";pass=" + (ev.backward ? "bwd" : "fwd");
            if (ev.compute_activation_bytes)
                out += ";ab=" + std::to_string(ev.compute_activation_bytes);
            if (ev.compute_gradient_bytes)
                out += ";gb=" + std::to_string(ev.compute_gradient_bytes);
            break;
        case TraceEvent::Kind::H2D:
        case TraceEvent::Kind::D2H:
            out = "layers=" + join_layers(ev.layers) +
                  ";wb=" + std::to_string(ev.moved_weight_bytes);
            if (ev.moved_activation_bytes)
                out += ";ab=" + std::to_string(ev.moved_activation_bytes);
            break;
        case TraceEvent::Kind::Stall:
            out = "reason=" + ev.reason;
            break;
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, res.ptr);
}

RunSummary summarize(const Trace& trace, int n_items) {
    if (trace.empty()) throw std::invalid_argument("summarize: empty trace");
    if (n_items < 1) throw std::invalid_argument("summarize: n_items must be >= 1");

    RunSummary s;
    double first_compute_start = -1.0;
    double last_compute_end = 0.0;
    for (const auto& ev : trace) {
        s.makespan = std::max(s.makespan, ev.t_end);
        if (ev.footprint_after.total() > s.peak_bytes) s.peak_bytes = ev.footprint_after.total();
        switch (ev.kind) {
            case TraceEvent::Kind::Compute:
                if (first_compute_start < 0) first_compute_start = ev.t_start;
                last_compute_end = std::max(last_compute_end, ev.t_end);
                break;
            case TraceEvent::Kind::H2D: s.n_transfers_h2d += 1; break;
            case TraceEvent::Kind::D2H: s.n_transfers_d2h += 1; break;
            case TraceEvent::Kind::Stall: s.total_stall_time += ev.t_end - ev.t_start; break;
        }
    }
    if (first_compute_start >= 0)
        s.per_item_time = (last_compute_end - first_compute_start) / n_items;
    return s;
}

void export_trace_csv(const Trace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export_trace: cannot open '" + path + "' for writing");
    out << "t_start,t_end,kind,detail,resident_bytes,weight_bytes,activation_bytes,gradient_bytes\n";
    for (const auto& ev : trace) {
        out << format_double(ev.t_start) << ',' << format_double(ev.t_end) << ','
            << kind_name(ev.kind) << ',' << event_detail(ev) << ',' << ev.resident_bytes_after
            << ',' << ev.footprint_after.weight_bytes << ',' << ev.footprint_after.activation_bytes
            << ',' << ev.footprint_after.gradient_bytes << '\n';
    }
    if (!out) throw std::runtime_error("export_trace: write to '" + path + "' failed");
}

void export_trace_json(const Trace& trace, const RunSummary& summary, const std::string& path) {
    json j;
    j["events"] = json::array();
    for (const auto& ev : trace) j["events"].push_back(event_to_json(ev));
    j["summary"] = json::parse(summary_to_json(summary));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export_trace: cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("export_trace: write to '" + path + "' failed");
}

Trace import_trace_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("import_trace: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("import_trace: '" + path + "' is empty");
    if (line != "t_start,t_end,kind,detail,resident_bytes,weight_bytes,activation_bytes,gradient_bytes")
        throw std::runtime_error("import_trace: unexpected header in '" + path + "'");

    Trace trace;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t pos = 0;
        while (cols.size() < 7) {
            auto next = line.find(',', pos);
            if (next == std::string::npos)
                throw std::runtime_error("import_trace: short row in '" + path + "'");
            cols.push_back(line.substr(pos, next - pos));
            pos = next + 1;
        }
        cols.push_back(line.substr(pos));

        TraceEvent ev;
        ev.t_start = std::stod(cols[0]);
        ev.t_end = std::stod(cols[1]);
        ev.kind = kind_from_name(cols[2]);
        for (const auto& [key, value] : parse_kv(cols[3])) {
            if (key == "item") ev.item = std::stoi(value);
            else if (key == "layer") ev.layer = std::stoi(value);
            else if (key == "pass") ev.backward = value == "bwd";
            else if (key == "layers") ev.layers = split_layers(value);
            else if (key == "wb") ev.moved_weight_bytes = std::stoull(value);
            else if (key == "reason") ev.reason = value;
            else if (key == "ab") {
                if (ev.kind == TraceEvent::Kind::Compute)
                    ev.compute_activation_bytes = std::stoull(value);
                else
                    ev.moved_activation_bytes = std::stoull(value);
            } else if (key == "gb") ev.compute_gradient_bytes = std::stoull(value);
            else throw std::runtime_error("import_trace: unknown detail key '" + key + "'");
        }
        ev.resident_bytes_after = std::stoull(cols[4]);
        ev.footprint_after.weight_bytes = std::stoull(cols[5]);
        ev.footprint_after.activation_bytes = std::stoull(cols[6]);
        ev.footprint_after.gradient_bytes = std::stoull(cols[7]);
        trace.push_back(std::move(ev));
    }
    return trace;
}

std::string summary_to_json(const RunSummary& s) {
    json j;
    j["strategy"] = s.strategy;
    j["k"] = s.k;
    j["k_prime"] = s.k_prime;
    j["peak_bytes"] = s.peak_bytes;
    j["per_item_time"] = s.per_item_time;
    j["makespan"] = s.makespan;
    j["total_stall_time"] = s.total_stall_time;
    j["n_transfers_h2d"] = s.n_transfers_h2d;
    j["n_transfers_d2h"] = s.n_transfers_d2h;
    j["output_digest"] = s.output_digest;
    j["peak_weight_bytes"] = s.peak_weight_bytes;
    j["peak_activation_bytes"] = s.peak_activation_bytes;
    j["peak_gradient_bytes"] = s.peak_gradient_bytes;
    j["total_gradient_bytes"] = s.total_gradient_bytes;
    if (s.has_loss) j["loss"] = s.loss;
    return j.dump();
}

}  // namespace pipesim
