// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pigpaxos {

using NodeId = uint16_t;
inline constexpr NodeId kNoNode = 0xFFFF;

// Log position. kNoSlot (-1) marks "no slot yet" in commit watermarks.
using Slot = int64_t;
inline constexpr Slot kNoSlot = -1;

// Virtual or wall-clock time in microseconds.
using TimeUs = int64_t;

// Leadership epoch, totally ordered by (round, proposer).
struct Ballot {
    uint32_t round = 0;
    NodeId proposer = 0;

    friend auto operator<=>(const Ballot&, const Ballot&) = default;
};

inline std::string to_string(const Ballot& b) {
    return std::to_string(b.round) + "." + std::to_string(b.proposer);
}

enum class OpType : uint8_t {
    Noop = 0,  // internal, used to fill recovered log gaps; never client-issued
    Put = 1,
    Get = 2,
};

// A client command. (client_id, request_seq) identifies the request for
// at-most-once execution.
struct Command {
    OpType op = OpType::Noop;
    std::string key;
    std::string value;  // empty for Get/Noop
    uint64_t client_id = 0;
    uint64_t request_seq = 0;

    friend bool operator==(const Command&, const Command&) = default;
};

enum class EntryState : uint8_t {
    Accepted = 0,
    Committed = 1,
    Executed = 2,
};

// One slot of the replicated log.
struct LogEntry {
    Slot slot = kNoSlot;
    Ballot ballot;
    Command command;
    std::set<NodeId> voters;  // set semantics: a node is never counted twice
    EntryState state = EntryState::Accepted;
};

// Static partition of the N-1 followers into reply-aggregation groups.
struct RelayGroupConfig {
    std::vector<std::vector<NodeId>> groups;  // each sorted ascending

    size_t group_count() const { return groups.size(); }
    size_t group_size(size_t i) const { return groups[i].size(); }

    // Reply threshold for group i given a global slack (clamped at zero).
    int threshold(size_t i, int prc) const {
        int g = static_cast<int>(groups[i].size()) - prc;
        return g > 0 ? g : 0;
    }

    // Index of the group containing `node`, or -1 for the leader / unknown ids.
    int group_of(NodeId node) const {
        for (size_t i = 0; i < groups.size(); ++i)
            for (NodeId m : groups[i])
                if (m == node) return static_cast<int>(i);
        return -1;
    }
};

// Deterministic id-contiguous partition of the non-leader nodes into
// `relay_groups` groups with sizes differing by at most one.
RelayGroupConfig partition_followers(int n, int relay_groups, NodeId leader);

struct GrayListConfig {
    bool enabled = true;
    TimeUs duration_us = 5'000'000;
    double probe_probability = 0.05;
};

// How the leader reaches the followers.
enum class CommMode : uint8_t {
    Pig = 0,     // relay fan-out / fan-in
    Direct = 1,  // classic point-to-point broadcast (oracle path)
};

struct ClusterConfig {
    int n = 0;
    std::vector<NodeId> node_ids;
    std::vector<std::string> peer_addrs;  // indexed by node id; socket mode only
    int relay_groups = 1;
    int prc = 0;
    TimeUs relay_timeout_us = 50'000;    // T_r
    TimeUs leader_timeout_us = 200'000;  // T_i
    GrayListConfig graylist;
    uint64_t seed = 1;
    CommMode comm_mode = CommMode::Pig;
    // Single-group majority shortcut; only takes effect when relay_groups == 1.
    bool majority_shortcut = true;
    // Node pre-installed as leader at ballot (1, id); kNoNode for a cold start.
    NodeId bootstrap_leader = 0;
    int max_round_retries = 10;  // retries before raising an alarm event

    int majority() const { return n / 2 + 1; }
    void validate() const;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pigpaxos
