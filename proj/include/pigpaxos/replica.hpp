// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <unordered_map>

#include "pigpaxos/engine.hpp"
#include "pigpaxos/pig.hpp"

namespace pigpaxos {

// Everything a replica needs from its surroundings. Implemented by the
// simulator and by the socket transport; also by test fixtures.
class Host {
public:
    virtual ~Host() = default;
    virtual TimeUs now() const = 0;
    virtual void send(NodeId to, const Message& msg) = 0;
    // `client` is an opaque routing handle (simulator entity, connection id).
    virtual void reply_client(uint64_t client, const ClientReply& reply) = 0;
    virtual void set_timer(TimeUs at, uint64_t token) = 0;
    virtual void count(Counter c) {}
    virtual void observe_commit(Slot slot, const Command& cmd) {}
    virtual void observe_execute(Slot slot, const Command& cmd) {}
    virtual void alarm(Slot slot, int retries) {}
};

// One cluster member: the Paxos engine plus the Pig communication layer,
// driven entirely by host events. Single-threaded by contract.
class Replica {
public:
    Replica(const ClusterConfig& cfg, NodeId id, Host& host);

    void start();  // arms the initial timers
    void on_message(NodeId from, const Message& msg);
    void on_client_request(uint64_t client_handle, const ClientRequest& req);
    void on_timer(uint64_t token);
    // Pending timers are lost while a node is down; re-arm and re-drive any
    // rounds that were in flight.
    void on_recover();

    const PaxosEngine& engine() const { return engine_; }
    PigLayer& pig() { return pig_; }
    NodeId id() const { return id_; }

    // Timer token kinds (pig owns 1 and 2).
    static constexpr uint64_t kElectionTimer = 3;
    static constexpr uint64_t kHeartbeatTimer = 4;
    static constexpr uint64_t kFlushTimer = 5;

private:
    struct Sink;

    void apply_effects(PaxosEngine::Effects&& fx);
    void dispatch_broadcast(const PaxosEngine::Broadcast& b);
    void process_envelope(const PigEnvelope& env);
    void send_all(std::vector<PigLayer::Send>&& sends);
    void request_timers(std::vector<PigLayer::TimerReq>&& timers);
    void arm_election_timer();
    TimeUs jittered_detect_interval();

    ClusterConfig cfg_;
    NodeId id_;
    Host& host_;
    PaxosEngine engine_;
    PigLayer pig_;
    std::mt19937_64 timer_rng_;
    std::unordered_map<uint64_t, uint64_t> client_handles_;  // client_id -> handle
    uint64_t flush_epoch_ = 0;  // invalidates superseded flush timers
};

}  // namespace pigpaxos
