// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#include "pigpaxos/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pigpaxos {

using nlohmann::json;

namespace {

json require(const json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("missing config key: ") + key);
    return j.at(key);
}

}  // namespace

ClusterConfig load_cluster_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    ClusterConfig cfg;
    try {
        cfg.n = require(j, "n").get<int>();
        cfg.relay_groups = require(j, "relay_groups").get<int>();
        cfg.prc = j.value("prc", 0);
        cfg.relay_timeout_us = static_cast<TimeUs>(require(j, "relay_timeout_ms").get<double>() * 1000);
        cfg.leader_timeout_us = static_cast<TimeUs>(require(j, "leader_timeout_ms").get<double>() * 1000);
        cfg.seed = j.value("seed", 1ULL);

        if (j.contains("graylist")) {
            const json& g = j.at("graylist");
            cfg.graylist.enabled = g.value("enabled", true);
            cfg.graylist.duration_us = static_cast<TimeUs>(g.value("duration_ms", 5000.0) * 1000);
            cfg.graylist.probe_probability = g.value("probe_prob", 0.05);
        }

        if (j.contains("peers")) {
            const json& peers = j.at("peers");
            cfg.peer_addrs.assign(cfg.n, "");
            for (auto it = peers.begin(); it != peers.end(); ++it) {
                int id = std::stoi(it.key());
                if (id < 0 || id >= cfg.n)
                    throw ConfigError("peer id out of range: " + it.key());
                cfg.peer_addrs[id] = it.value().get<std::string>();
            }
            for (int id = 0; id < cfg.n; ++id)
                if (cfg.peer_addrs[id].empty())
                    throw ConfigError("peers map missing node " + std::to_string(id));
        }

        for (int id = 0; id < cfg.n; ++id) cfg.node_ids.push_back(static_cast<NodeId>(id));
        cfg.bootstrap_leader = static_cast<NodeId>(j.value("bootstrap_leader", 0));
        if (j.value("cold_start", false)) cfg.bootstrap_leader = kNoNode;
        cfg.majority_shortcut = j.value("majority_shortcut", true);
        cfg.max_round_retries = j.value("max_round_retries", 10);
        const std::string mode = j.value("comm_mode", "pig");
        if (mode == "pig")
            cfg.comm_mode = CommMode::Pig;
        else if (mode == "direct")
            cfg.comm_mode = CommMode::Direct;
        else
            throw ConfigError("comm_mode must be \"pig\" or \"direct\"");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config field: ") + e.what());
    }

    cfg.validate();
    // The group thresholds must still reach a majority under the configured
    // slack; reject unusable deployments up front.
    return cfg;
}

ClusterConfig load_cluster_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_cluster_config(ss.str());
}

std::string dump_cluster_config(const ClusterConfig& cfg) {
    json j;
    j["n"] = cfg.n;
    j["relay_groups"] = cfg.relay_groups;
    j["prc"] = cfg.prc;
    j["relay_timeout_ms"] = cfg.relay_timeout_us / 1000.0;
    j["leader_timeout_ms"] = cfg.leader_timeout_us / 1000.0;
    j["seed"] = cfg.seed;
    j["graylist"] = {{"enabled", cfg.graylist.enabled},
                     {"duration_ms", cfg.graylist.duration_us / 1000.0},
                     {"probe_prob", cfg.graylist.probe_probability}};
    if (!cfg.peer_addrs.empty()) {
        json peers = json::object();
        for (int id = 0; id < cfg.n; ++id)
            peers[std::to_string(id)] = cfg.peer_addrs[id];
        j["peers"] = peers;
    }
    if (cfg.bootstrap_leader == kNoNode)
        j["cold_start"] = true;
    else
        j["bootstrap_leader"] = cfg.bootstrap_leader;
    j["majority_shortcut"] = cfg.majority_shortcut;
    j["max_round_retries"] = cfg.max_round_retries;
    j["comm_mode"] = cfg.comm_mode == CommMode::Pig ? "pig" : "direct";
    return j.dump(2);
}

}  // namespace pigpaxos
