// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#include "pigpaxos/scenario.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pigpaxos/bench.hpp"
#include "pigpaxos/config.hpp"

namespace pigpaxos::sim {

using nlohmann::json;

namespace {

NetworkProfile profile_from_json(const json& j) {
    NetworkProfile p;
    if (j.contains("latency_us")) {
        const auto& l = j.at("latency_us");
        if (!l.is_array() || l.size() != 2)
            throw ConfigError("profile.latency_us must be [lo, hi]");
        p.latency_lo_us = l[0].get<TimeUs>();
        p.latency_hi_us = l[1].get<TimeUs>();
    }
    if (j.value("preset", "") == std::string("wan")) p = NetworkProfile::wan();
    p.drop_probability = j.value("drop_prob", p.drop_probability);
    p.cpu_base_us = j.value("cpu_base_us", p.cpu_base_us);
    p.cpu_per_100_bytes_us = j.value("cpu_per_100b_us", p.cpu_per_100_bytes_us);
    if (p.latency_lo_us < 0 || p.latency_hi_us < p.latency_lo_us)
        throw ConfigError("profile.latency_us bounds out of order");
    if (p.drop_probability < 0.0 || p.drop_probability >= 1.0)
        throw ConfigError("profile.drop_prob must be in [0, 1)");
    return p;
}

WorkloadSpec workload_from_json(const json& j) {
    WorkloadSpec w;
    w.key_space = j.value("keys", w.key_space);
    w.read_fraction = j.value("read_frac", w.read_fraction);
    w.payload_bytes = j.value("payload", w.payload_bytes);
    w.client_count = j.value("clients", w.client_count);
    w.duration_us = static_cast<TimeUs>(j.value("duration_ms", 0.0) * 1000);
    w.total_commands = j.value("commands", w.total_commands);
    w.target_rate = j.value("target_rate", w.target_rate);
    w.client_timeout_us = static_cast<TimeUs>(j.value("client_timeout_ms", 1000.0) * 1000);
    w.validate();
    return w;
}

FaultAction action_from_string(const std::string& s) {
    if (s == "crash") return FaultAction::Crash;
    if (s == "recover") return FaultAction::Recover;
    if (s == "partition") return FaultAction::Partition;
    if (s == "heal") return FaultAction::Heal;
    throw ConfigError("fault action must be crash|recover|partition|heal, got: " + s);
}

std::vector<FaultEvent> faults_from_json(const json& j, int n) {
    std::vector<FaultEvent> out;
    for (const auto& f : j) {
        FaultEvent ev;
        if (!f.contains("at_ms")) throw ConfigError("fault event missing at_ms");
        ev.at = static_cast<TimeUs>(f.at("at_ms").get<double>() * 1000);
        ev.action = action_from_string(f.value("action", ""));
        for (int id : f.value("nodes", std::vector<int>{})) {
            if (id < 0 || id >= n)
                throw ConfigError("fault event node out of range: " + std::to_string(id));
            ev.nodes.push_back(static_cast<NodeId>(id));
        }
        out.push_back(std::move(ev));
    }
    return out;
}

}  // namespace

NetworkProfile load_profile_json(const std::string& json_text) {
    return profile_from_json(json::parse(json_text));
}

Scenario load_scenario(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
    }

    Scenario sc;
    try {
        sc.name = j.value("name", "scenario");
        if (!j.contains("config")) throw ConfigError("scenario missing config");
        sc.config = load_cluster_config(j.at("config").dump());
        sc.profile = j.contains("profile") ? profile_from_json(j.at("profile"))
                                           : NetworkProfile::lan();
        if (!j.contains("workload")) throw ConfigError("scenario missing workload");
        sc.workload = workload_from_json(j.at("workload"));
        if (j.contains("faults")) sc.faults = faults_from_json(j.at("faults"), sc.config.n);
        if (j.contains("sweep_r"))
            sc.sweep_r = j.at("sweep_r").get<std::vector<int>>();
        if (j.contains("variants")) {
            for (const auto& v : j.at("variants")) {
                Scenario::Variant var;
                var.name = v.value("name", "variant");
                var.overrides_json = v.value("config", json::object()).dump();
                sc.variants.push_back(std::move(var));
            }
        }
        sc.out_path = j.value("out", "");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad scenario field: ") + e.what());
    }
    return sc;
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_scenario(ss.str());
}

namespace {

ClusterConfig apply_overrides(const ClusterConfig& base, const std::string& overrides) {
    json merged = json::parse(dump_cluster_config(base));
    json patch = json::parse(overrides);
    for (auto it = patch.begin(); it != patch.end(); ++it) merged[it.key()] = it.value();
    return load_cluster_config(merged.dump());
}

}  // namespace

ScenarioOutcome run_scenario(const Scenario& sc) {
    ScenarioOutcome out;
    std::ostringstream csv;
    std::ostringstream summary;
    char buf[64];

    auto note_run = [&](const std::string& label, const sim::RunResult& r) {
        for (const Violation& v : r.violations) {
            out.ok = false;
            out.violations.push_back(v);
            summary << label << ": VIOLATION " << v.invariant << " at " << v.at << "us: "
                    << v.detail << "\n";
        }
    };

    if (!sc.sweep_r.empty()) {
        csv << "r,max_throughput\n";
        for (int r : sc.sweep_r) {
            ClusterConfig cfg = sc.config;
            cfg.relay_groups = r;
            cfg.validate();
            SimOptions opt;
            opt.check_linearizability = false;
            RunResult res = run(cfg, sc.profile, sc.workload, sc.faults, opt);
            note_run("r=" + std::to_string(r), res);
            snprintf(buf, sizeof buf, "%.2f", res.throughput());
            csv << r << "," << buf << "\n";
            summary << sc.name << " r=" << r << ": "
                    << bench::MetricsReport::from_run(res).to_string() << "\n";
        }
    } else if (!sc.variants.empty()) {
        csv << "variant,throughput,median_us,p25_us,p75_us,retries,relay_timeouts\n";
        for (const auto& var : sc.variants) {
            ClusterConfig cfg = apply_overrides(sc.config, var.overrides_json);
            SimOptions opt;
            opt.check_linearizability = false;
            RunResult res = run(cfg, sc.profile, sc.workload, sc.faults, opt);
            note_run(var.name, res);
            bench::MetricsReport m = bench::MetricsReport::from_run(res);
            snprintf(buf, sizeof buf, "%.2f", m.throughput);
            csv << var.name << "," << buf << "," << m.median_us << "," << m.p25_us << ","
                << m.p75_us << "," << m.retries << "," << m.relay_timeouts << "\n";
            summary << sc.name << " " << var.name << ": " << m.to_string() << "\n";
        }
    } else {
        RunResult res = run(sc.config, sc.profile, sc.workload, sc.faults);
        note_run(sc.name, res);
        csv << res.to_csv();
        summary << sc.name << ": " << bench::MetricsReport::from_run(res).to_string()
                << "\n";
    }

    out.csv = csv.str();
    out.summary = summary.str();
    return out;
}

}  // namespace pigpaxos::sim
