// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pigpaxos/types.hpp"

namespace pigpaxos {

enum class MsgType : uint8_t {
    P1a = 1,
    P1b = 2,
    P2a = 3,
    P2b = 4,
    P3 = 5,
    PigEnvelope = 6,
    AggregatedReply = 7,
    ClientRequest = 8,
    ClientReply = 9,
};

// Identifies one fan-out/fan-in round; retries allocate a fresh id.
struct PigMsgId {
    NodeId initiator = 0;
    uint64_t sequence = 0;

    friend auto operator<=>(const PigMsgId&, const PigMsgId&) = default;
};

// Leadership proposal.
struct P1a {
    Ballot ballot;
};

// One reported log entry in a leadership reply. Committed entries are flagged
// so the new leader adopts them instead of re-proposing.
struct RecoveredEntry {
    Slot slot = kNoSlot;
    Ballot ballot;
    Command command;
    bool committed = false;

    friend bool operator==(const RecoveredEntry&, const RecoveredEntry&) = default;
};

// Leadership ack (ballot equals the proposal's) or rejection (ballot is the
// higher one the voter has promised).
struct P1b {
    Ballot ballot;
    NodeId voter = 0;
    std::vector<RecoveredEntry> accepted;
    std::optional<PigMsgId> pig;  // set when replying into a relayed round
};

// Accept request; commit_up_to piggybacks the commit watermark.
struct P2a {
    Ballot ballot;
    Slot slot = 0;
    Slot commit_up_to = kNoSlot;
    Command command;
};

// Accept ack, or rejection carrying the higher promised ballot.
struct P2b {
    Ballot ballot;
    Slot slot = 0;
    NodeId voter = 0;
    std::optional<Ballot> reject_ballot;
    std::optional<PigMsgId> pig;
};

// Standalone commit notice; only sent for slots the leader has committed.
struct P3 {
    Slot slot = 0;
    Command command;
};

// Relayed broadcast wrapper. The node named in `relay` fans the same envelope
// out to the rest of `group` and aggregates their replies; everyone else
// replies to the relay.
struct PigEnvelope {
    PigMsgId pig_id;
    NodeId relay = 0;
    std::vector<NodeId> group;  // sorted members of the relay's group
    std::vector<uint8_t> payload;  // encoded inner message (P1a, P2a or P3)
};

// Compressed group response: an ack count plus the ids that did NOT ack.
struct AggregatedReply {
    PigMsgId pig_id;
    Ballot ballot;
    Slot slot = kNoSlot;  // kNoSlot for phase-1 rounds
    uint16_t ack_count = 0;
    std::vector<NodeId> missing_voters;  // sorted
    std::optional<Ballot> reject_ballot;
    std::vector<RecoveredEntry> recovered;  // merged phase-1 reports
};

struct ClientRequest {
    Command command;
};

enum class ReplyStatus : uint8_t {
    Ok = 0,
    NotLeader = 1,
    Error = 2,
};

struct ClientReply {
    uint64_t client_id = 0;
    uint64_t request_seq = 0;
    ReplyStatus status = ReplyStatus::Ok;
    bool found = false;       // Get: key existed
    std::string value;        // Get result payload
    NodeId leader_hint = kNoNode;
};

using Message = std::variant<P1a, P1b, P2a, P2b, P3, PigEnvelope, AggregatedReply,
                             ClientRequest, ClientReply>;

MsgType type_of(const Message& m);
const char* type_name(MsgType t);

}  // namespace pigpaxos
