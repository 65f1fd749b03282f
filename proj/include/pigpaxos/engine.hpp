// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <unordered_map>
#include <vector>

#include "pigpaxos/kvstore.hpp"
#include "pigpaxos/messages.hpp"
#include "pigpaxos/types.hpp"

namespace pigpaxos {

enum class Role : uint8_t { Follower = 0, Candidate = 1, Leader = 2 };

// Protocol events the replica surfaces to its host for metrics/invariants.
enum class Counter {
    StaleVoteDropped,
    LateReplyDropped,
    DuplicateEnvelope,
    MalformedPayload,
    RelayTimeoutFlush,
    RoundRetry,
    RetryAlarm,
    GraylistInsert,
    GraylistProbe,
    CommittedConflict,
    UnknownAggregate,
    StaleClientRequest,
};

// Pure Multi-Paxos replica state machine. Consumes messages and timer ticks
// (time is always an input), emits broadcasts and replies; knows nothing about
// relays or transports. Strictly single-threaded.
class PaxosEngine {
public:
    struct Broadcast {
        Message payload;
        Slot slot = kNoSlot;  // kNoSlot for phase-1
        Ballot ballot;
        bool phase1 = false;
        bool expect_replies = true;  // false for P3 / heartbeats
    };

    struct Effects {
        std::vector<Broadcast> broadcasts;
        std::vector<ClientReply> replies;
        std::vector<Slot> committed_slots;  // newly committed this call
        bool became_leader = false;
        bool stepped_down = false;
        bool schedule_flush = false;  // commits pending dissemination

        void merge(Effects&& o);
    };

    using CountFn = void (*)(void* ctx, Counter c);

    PaxosEngine(const ClusterConfig& cfg, NodeId id);

    void set_counter_hook(void* ctx, CountFn fn) {
        count_ctx_ = ctx;
        count_fn_ = fn;
    }

    // -- message handlers ----------------------------------------------------

    P1b handle_p1a(const P1a& m, TimeUs now, Effects& fx);
    P2b handle_p2a(const P2a& m, TimeUs now, Effects& fx);
    void handle_p3(const P3& m, bool refresh_liveness, TimeUs now, Effects& fx);

    // Client entry point. Duplicate (client_id, request_seq) pairs re-emit the
    // cached reply; in-flight duplicates are absorbed silently.
    Effects client_request(const Command& cmd, TimeUs now);

    // Phase-2 vote from `voter` at `ballot` for `slot`.
    Effects on_vote(Slot slot, NodeId voter, Ballot ballot, TimeUs now);

    // Phase-1 acks (and merged log reports) from a quorum fragment.
    Effects on_phase1_votes(Ballot ballot, const std::vector<NodeId>& voters,
                            const std::vector<RecoveredEntry>& recovered, TimeUs now);

    // A peer reported a higher promised ballot.
    Effects on_reject(Ballot higher, TimeUs now);

    // -- timer inputs ----------------------------------------------------------

    // Follower liveness check; may start (or bump) a candidacy.
    Effects on_election_timeout(TimeUs now);
    // Leader keepalive when no broadcast went out for a full leader timeout.
    Effects on_heartbeat(TimeUs now);
    // Disseminates commit watermarks that never rode a later accept round.
    Effects on_flush(TimeUs now);

    // -- introspection ---------------------------------------------------------

    Role role() const { return role_; }
    bool is_leader() const { return role_ == Role::Leader; }
    Ballot promised() const { return promised_; }
    Ballot leader_ballot() const { return leader_ballot_; }
    NodeId leader_hint() const { return leader_hint_; }
    Slot executed_up_to() const { return exec_watermark_; }
    Slot next_slot() const { return next_slot_; }
    const KvStore& kv() const { return kv_; }
    size_t log_size() const { return log_.size(); }
    const LogEntry* entry(Slot s) const;
    NodeId id() const { return id_; }
    TimeUs last_leader_traffic() const { return last_leader_traffic_; }
    // Time after which the follower suspects the leader (base, unjittered).
    TimeUs detect_interval() const { return 3 * cfg_.leader_timeout_us; }

    std::vector<Command> executed_commands() const;

private:
    struct Session {
        int64_t last_seq = -1;
        ClientReply cached;
    };

    void count(Counter c) {
        if (count_fn_) count_fn_(count_ctx_, c);
    }

    void adopt(Ballot b, TimeUs now, Effects& fx);
    void step_down(TimeUs now, Effects& fx);
    void become_leader(TimeUs now, Effects& fx);
    void accept_entry(Slot slot, Ballot b, const Command& cmd);
    void commit(Slot slot, TimeUs now, Effects& fx);
    void apply_watermark(Slot up_to, Ballot b, TimeUs now, Effects& fx);
    void advance_execution(TimeUs now, Effects& fx);
    Broadcast make_accept(Slot slot, TimeUs now);
    std::vector<RecoveredEntry> report_log() const;

    const ClusterConfig cfg_;
    const NodeId id_;
    const int majority_;

    Role role_ = Role::Follower;
    Ballot promised_;
    Ballot leader_ballot_;        // valid when leader
    NodeId leader_hint_ = kNoNode;
    TimeUs last_leader_traffic_ = 0;
    TimeUs last_broadcast_ = 0;   // leader: last accept/heartbeat fan-out
    TimeUs last_accept_sent_ = 0; // leader: last P2a fan-out (flush gating)

    std::vector<std::optional<LogEntry>> log_;
    Slot exec_watermark_ = kNoSlot;  // contiguous executed prefix
    Slot last_flushed_ = kNoSlot;    // highest slot disseminated via P3
    Slot next_slot_ = 0;

    // Candidacy state.
    Ballot candidate_ballot_;
    std::set<NodeId> candidate_votes_;
    std::map<Slot, RecoveredEntry> candidate_recovered_;

    // In-flight client commands at the leader: client -> (seq, slot).
    std::unordered_map<uint64_t, std::pair<uint64_t, Slot>> pending_;
    std::unordered_map<uint64_t, Session> sessions_;

    KvStore kv_;
    std::mt19937_64 jitter_rng_;

    void* count_ctx_ = nullptr;
    CountFn count_fn_ = nullptr;
};

}  // namespace pigpaxos
