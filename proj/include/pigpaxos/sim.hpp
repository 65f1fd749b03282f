// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "pigpaxos/messages.hpp"
#include "pigpaxos/replica.hpp"
#include "pigpaxos/types.hpp"

namespace pigpaxos::sim {

// Link and processing-cost model. Latencies are uniform per delivery; CPU
// costs model (de)serialization work and apply at both ends of a message.
struct NetworkProfile {
    TimeUs latency_lo_us = 300;
    TimeUs latency_hi_us = 600;
    double drop_probability = 0.0;
    int64_t cpu_base_us = 10;
    int64_t cpu_per_100_bytes_us = 1;

    struct LinkOverride {
        int from = -1;  // -1 matches any endpoint
        int to = -1;
        TimeUs lo = 0;
        TimeUs hi = 0;
    };
    std::vector<LinkOverride> links;

    static NetworkProfile lan() { return {}; }
    static NetworkProfile wan() {
        NetworkProfile p;
        p.latency_lo_us = 30'000;
        p.latency_hi_us = 70'000;
        return p;
    }
};

enum class FaultAction : uint8_t { Crash, Recover, Partition, Heal };

struct FaultEvent {
    TimeUs at = 0;
    FaultAction action = FaultAction::Crash;
    std::vector<NodeId> nodes;  // crash/recover targets, or one side of a partition
};

struct WorkloadSpec {
    int key_space = 1000;
    double read_fraction = 0.5;
    int payload_bytes = 8;
    int client_count = 1;
    TimeUs duration_us = 0;       // 0: run until total_commands complete
    int64_t total_commands = 0;   // 0: run until duration
    double target_rate = 0.0;     // optional cap, ops/sec across all clients
    TimeUs client_timeout_us = 1'000'000;

    void validate() const;
};

// One client-visible operation for linearizability checking.
struct HistoryOp {
    uint64_t client = 0;
    std::string key;
    OpType op = OpType::Get;
    std::string value;        // written value (Put)
    TimeUs invoke = 0;
    TimeUs complete = -1;     // -1: no response observed
    bool result_found = false;
    std::string result_value;
    bool completed = false;
};

struct Violation {
    std::string invariant;
    TimeUs at = 0;
    std::string detail;
};

struct NodeCounters {
    int64_t sent = 0;
    int64_t received = 0;
    int64_t handled() const { return sent + received; }
    std::map<Counter, int64_t> events;
};

struct RunResult {
    int64_t committed_ops = 0;
    std::vector<TimeUs> latencies_us;
    std::map<int64_t, int64_t> windows;  // virtual second -> completions
    std::vector<NodeCounters> nodes;
    int64_t cluster_sends = 0;
    int64_t cluster_received = 0;
    int64_t dropped = 0;
    int64_t in_flight_at_end = 0;
    std::vector<Violation> violations;
    std::vector<HistoryOp> history;
    TimeUs last_reply_us = 0;
    TimeUs end_us = 0;
    NodeId final_leader = kNoNode;
    std::vector<uint64_t> state_hashes;          // per replica
    std::vector<std::vector<Command>> executed;  // per replica (when captured)
    std::map<Slot, std::vector<NodeId>> leader_tally;  // leader's voter sets

    int64_t event_count(Counter c) const;
    double throughput() const;  // committed ops per steady virtual second
    TimeUs latency_percentile(double p) const;
    std::string to_csv() const;  // deterministic metrics dump
};

struct SimOptions {
    bool capture_logs = false;
    bool check_linearizability = true;
    TimeUs drain_us = 5'000;  // settle window after the last reply
    bool count_from_bootstrap = true;
};

// Deterministic discrete-event run: a pure function of (config, profile,
// workload, faults, seed baked into config).
RunResult run(const ClusterConfig& cfg, const NetworkProfile& profile,
              const WorkloadSpec& workload, const std::vector<FaultEvent>& faults = {},
              const SimOptions& options = {});

}  // namespace pigpaxos::sim
