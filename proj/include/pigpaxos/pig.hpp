// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pigpaxos/messages.hpp"
#include "pigpaxos/types.hpp"

namespace pigpaxos {

// Soft exclusion set for suspected-faulty nodes. Entries expire; gray nodes
// are still probed occasionally.
class GrayList {
public:
    explicit GrayList(const GrayListConfig& cfg) : cfg_(cfg) {}

    void insert(NodeId node, TimeUs now) {
        if (!cfg_.enabled) return;
        entries_[node] = now + cfg_.duration_us;
    }
    void remove(NodeId node) { entries_.erase(node); }
    bool contains(NodeId node, TimeUs now) const {
        auto it = entries_.find(node);
        return it != entries_.end() && it->second > now;
    }
    size_t active_size(TimeUs now) const {
        size_t n = 0;
        for (const auto& [_, exp] : entries_)
            if (exp > now) ++n;
        return n;
    }
    double probe_probability() const { return cfg_.probe_probability; }
    bool enabled() const { return cfg_.enabled; }

private:
    GrayListConfig cfg_;
    std::map<NodeId, TimeUs> entries_;  // node -> expiry
};

// Fan-out/fan-in communication layer of one replica. Wraps the initiator's
// logical broadcasts into per-group relay envelopes, aggregates replies on the
// relay side, rotates relays randomly and retries rounds that miss the leader
// timeout with fresh relays.
class PigLayer {
public:
    struct Send {
        NodeId to;
        Message msg;
    };

    struct TimerReq {
        TimeUs at;
        uint64_t token;
    };

    // Vote sinks routed back to the owning replica's engine.
    struct VoteSink {
        virtual ~VoteSink() = default;
        virtual void phase2_votes(Slot slot, Ballot ballot,
                                  const std::vector<NodeId>& voters) = 0;
        virtual void phase1_votes(Ballot ballot, const std::vector<NodeId>& voters,
                                  const std::vector<RecoveredEntry>& recovered) = 0;
        virtual void reject(Ballot higher) = 0;
        virtual void count_event(Counter c) = 0;
        virtual void alarm_round(Slot slot, int retries) = 0;
    };

    PigLayer(const ClusterConfig& cfg, NodeId id);

    // --- initiator side -------------------------------------------------------

    // One logical broadcast: an envelope per group, each to a freshly rotated
    // relay. Registers a retry deadline when replies are expected.
    std::vector<Send> broadcast(const Message& payload, Slot slot, Ballot ballot,
                                bool phase1, bool expect_replies, TimeUs now,
                                std::vector<TimerReq>& timers, int carried_retries = 0);

    void on_aggregated_reply(const AggregatedReply& agg, NodeId from, TimeUs now,
                             VoteSink& sink);

    // Leader deadline for a round. Returns the sends of the retry fan-out.
    std::vector<Send> on_round_deadline(uint64_t seq, TimeUs now,
                                        std::vector<TimerReq>& timers, VoteSink& sink);

    // The slot committed; its round (if any) is complete.
    void close_round_for_slot(Slot slot);
    // Leadership resolved (won, lost or bumped); drop phase-1 rounds.
    void close_phase1_rounds();
    void close_all_rounds();

    // --- relay / leaf side ------------------------------------------------------

    // True when this envelope was already fanned out / processed.
    bool seen(const PigMsgId& id) const { return seen_.count(id) > 0; }
    void mark_seen(const PigMsgId& id) { seen_.insert(id); }

    // Relay behavior: re-transmit the same envelope to the rest of the group
    // and open the reply aggregation (skipped for no-reply payloads like P3).
    std::vector<Send> relay_fanout(const PigEnvelope& env, bool expect_replies,
                                   Ballot ballot, Slot slot, bool phase1, TimeUs now,
                                   std::vector<TimerReq>& timers);

    // Record this relay's own engine response for the round.
    std::vector<Send> record_local_reply(const PigMsgId& id, const Message& reply,
                                         TimeUs now, VoteSink& sink);

    // A tagged follower reply arrived at the relay.
    std::vector<Send> on_tagged_reply(const PigMsgId& id, const Message& reply,
                                      TimeUs now, VoteSink& sink);

    // Relay aggregation deadline.
    std::vector<Send> on_relay_deadline(uint64_t local_seq, TimeUs now, VoteSink& sink);

    // The local ballot advanced; short-circuit aggregations for older ballots.
    std::vector<Send> abort_stale_aggregations(Ballot promoted, TimeUs now,
                                               VoteSink& sink);

    // --- selection -------------------------------------------------------------

    // One relay per group, uniform over non-gray members (whole group with
    // probe probability, or when every member is gray).
    std::vector<NodeId> select_relays(TimeUs now);

    GrayList& graylist() { return graylist_; }
    const RelayGroupConfig& groups() const { return groups_; }
    int group_of(NodeId node) const { return groups_.group_of(node); }
    size_t open_rounds() const { return rounds_.size(); }
    size_t open_aggregations() const { return pendings_.size(); }

    // Timer token layout shared with the replica.
    static constexpr uint64_t kRoundTimer = 1;
    static constexpr uint64_t kRelayTimer = 2;
    static uint64_t pack_token(uint64_t kind, uint64_t seq) { return (kind << 56) | seq; }
    static uint64_t token_kind(uint64_t token) { return token >> 56; }
    static uint64_t token_seq(uint64_t token) { return token & 0x00FFFFFFFFFFFFFFULL; }

private:
    struct Round {
        uint64_t seq = 0;
        Slot slot = kNoSlot;
        Ballot ballot;
        bool phase1 = false;
        Message payload;
        std::vector<NodeId> relays;        // by group index
        std::set<int> responded_groups;
        int retries = 0;
    };

    struct Pending {
        PigMsgId id;
        Ballot ballot;
        Slot slot = kNoSlot;
        bool phase1 = false;
        uint64_t local_seq = 0;
        std::vector<NodeId> expected;  // the whole group, relay included
        std::set<NodeId> acks;
        std::map<Slot, RecoveredEntry> recovered;
        int threshold = 0;
    };

    std::vector<Send> make_envelopes(Round& round, TimeUs now,
                                     std::vector<TimerReq>& timers);
    std::vector<Send> flush(Pending& p, std::optional<Ballot> reject, TimeUs now,
                            VoteSink* sink);
    std::vector<Send> maybe_flush(Pending& p, TimeUs now, VoteSink& sink);
    void feed_votes(const AggregatedReply& agg, const std::vector<NodeId>& group,
                    VoteSink& sink);

    const ClusterConfig cfg_;
    const NodeId id_;
    RelayGroupConfig groups_;
    GrayList graylist_;
    std::mt19937_64 rng_;

    uint64_t next_seq_ = 1;
    std::unordered_map<uint64_t, Round> rounds_;       // by pig sequence
    std::map<Slot, uint64_t> round_by_slot_;

    uint64_t next_local_seq_ = 1;
    std::map<PigMsgId, uint64_t> pending_by_id_;
    std::unordered_map<uint64_t, Pending> pendings_;   // by local sequence
    std::set<PigMsgId> seen_;
};

}  // namespace pigpaxos
