// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#include "pigpaxos/replica.hpp"

#include "pigpaxos/rng.hpp"
#include "pigpaxos/wire.hpp"

namespace pigpaxos {

// Routes pig-layer verdicts into the engine and host.
struct Replica::Sink : PigLayer::VoteSink {
    Replica& r;
    explicit Sink(Replica& rep) : r(rep) {}

    void phase2_votes(Slot slot, Ballot ballot,
                      const std::vector<NodeId>& voters) override {
        for (NodeId v : voters)
            r.apply_effects(r.engine_.on_vote(slot, v, ballot, r.host_.now()));
    }
    void phase1_votes(Ballot ballot, const std::vector<NodeId>& voters,
                      const std::vector<RecoveredEntry>& recovered) override {
        r.apply_effects(r.engine_.on_phase1_votes(ballot, voters, recovered,
                                                  r.host_.now()));
    }
    void reject(Ballot higher) override {
        r.apply_effects(r.engine_.on_reject(higher, r.host_.now()));
    }
    void count_event(Counter c) override { r.host_.count(c); }
    void alarm_round(Slot slot, int retries) override { r.host_.alarm(slot, retries); }
};

namespace {

void count_hook(void* ctx, Counter c) { static_cast<Host*>(ctx)->count(c); }

}  // namespace

Replica::Replica(const ClusterConfig& cfg, NodeId id, Host& host)
    : cfg_(cfg),
      id_(id),
      host_(host),
      engine_(cfg, id),
      pig_(cfg, id),
      timer_rng_(derive_seed(cfg.seed, 0x3000u + id)) {
    engine_.set_counter_hook(&host_, &count_hook);
}

void Replica::start() {
    arm_election_timer();
    if (engine_.is_leader())
        host_.set_timer(host_.now() + cfg_.leader_timeout_us, kHeartbeatTimer << 56);
}

TimeUs Replica::jittered_detect_interval() {
    // +/-20% jitter keeps candidates from dueling in lockstep.
    const double f = 0.8 + 0.4 * rng_unit(timer_rng_);
    return static_cast<TimeUs>(engine_.detect_interval() * f);
}

void Replica::arm_election_timer() {
    host_.set_timer(host_.now() + jittered_detect_interval(), kElectionTimer << 56);
}

void Replica::send_all(std::vector<PigLayer::Send>&& sends) {
    for (auto& s : sends) host_.send(s.to, s.msg);
}

void Replica::request_timers(std::vector<PigLayer::TimerReq>&& timers) {
    for (const auto& t : timers) host_.set_timer(t.at, t.token);
}

void Replica::dispatch_broadcast(const PaxosEngine::Broadcast& b) {
    if (cfg_.comm_mode == CommMode::Direct) {
        for (NodeId peer = 0; peer < cfg_.n; ++peer)
            if (peer != id_) host_.send(peer, b.payload);
        return;
    }
    std::vector<PigLayer::TimerReq> timers;
    send_all(pig_.broadcast(b.payload, b.slot, b.ballot, b.phase1, b.expect_replies,
                            host_.now(), timers));
    request_timers(std::move(timers));
}

void Replica::apply_effects(PaxosEngine::Effects&& fx) {
    for (Slot s : fx.committed_slots) {
        pig_.close_round_for_slot(s);
        host_.observe_commit(s, engine_.entry(s)->command);
    }
    if (fx.became_leader || fx.stepped_down) {
        pig_.close_phase1_rounds();
        if (fx.stepped_down) pig_.close_all_rounds();
        if (fx.became_leader)
            host_.set_timer(host_.now() + cfg_.leader_timeout_us, kHeartbeatTimer << 56);
        if (fx.stepped_down) arm_election_timer();
    }
    for (const ClientReply& reply : fx.replies) {
        auto it = client_handles_.find(reply.client_id);
        if (it != client_handles_.end()) host_.reply_client(it->second, reply);
    }
    for (const auto& b : fx.broadcasts) dispatch_broadcast(b);
    if (fx.schedule_flush) {
        ++flush_epoch_;
        host_.set_timer(host_.now() + cfg_.relay_timeout_us,
                        (kFlushTimer << 56) | flush_epoch_);
    }
}

void Replica::process_envelope(const PigEnvelope& env) {
    if (pig_.seen(env.pig_id)) {
        host_.count(Counter::DuplicateEnvelope);
        return;
    }
    pig_.mark_seen(env.pig_id);

    Message payload;
    try {
        payload = wire::decode(env.payload);
    } catch (const wire::MalformedFrame&) {
        host_.count(Counter::MalformedPayload);
        return;
    }

    const TimeUs now = host_.now();
    const bool am_relay = env.relay == id_;
    Sink sink(*this);

    // Every receiver, relay included, first processes the payload as a
    // regular follower.
    Message reply;
    bool have_reply = false;
    Ballot round_ballot;
    Slot round_slot = kNoSlot;
    bool phase1 = false;
    PaxosEngine::Effects fx;

    if (const P1a* m = std::get_if<P1a>(&payload)) {
        P1b r = engine_.handle_p1a(*m, now, fx);
        r.pig = env.pig_id;
        reply = r;
        have_reply = true;
        round_ballot = m->ballot;
        phase1 = true;
    } else if (const P2a* m = std::get_if<P2a>(&payload)) {
        P2b r = engine_.handle_p2a(*m, now, fx);
        r.pig = env.pig_id;
        reply = r;
        have_reply = true;
        round_ballot = m->ballot;
        round_slot = m->slot;
    } else if (const P3* m = std::get_if<P3>(&payload)) {
        engine_.handle_p3(*m, env.pig_id.initiator == engine_.leader_hint(), now, fx);
    } else {
        host_.count(Counter::MalformedPayload);
        return;
    }

    if (am_relay) {
        std::vector<PigLayer::TimerReq> timers;
        send_all(pig_.relay_fanout(env, have_reply, round_ballot, round_slot, phase1,
                                   now, timers));
        request_timers(std::move(timers));
        if (have_reply)
            send_all(pig_.record_local_reply(env.pig_id, reply, now, sink));
    } else if (have_reply) {
        host_.send(env.relay, reply);
    }
    apply_effects(std::move(fx));
    // A promoted ballot short-circuits aggregations opened for older leaders.
    send_all(pig_.abort_stale_aggregations(engine_.promised(), now, sink));
}

void Replica::on_message(NodeId from, const Message& msg) {
    const TimeUs now = host_.now();
    Sink sink(*this);

    if (const PigEnvelope* env = std::get_if<PigEnvelope>(&msg)) {
        process_envelope(*env);
        return;
    }
    if (const AggregatedReply* agg = std::get_if<AggregatedReply>(&msg)) {
        pig_.on_aggregated_reply(*agg, from, now, sink);
        return;
    }
    if (const P1b* r = std::get_if<P1b>(&msg)) {
        if (r->pig) {
            send_all(pig_.on_tagged_reply(*r->pig, msg, now, sink));
        } else if (r->ballot == engine_.promised() && r->ballot.proposer == id_) {
            sink.phase1_votes(r->ballot, {r->voter}, r->accepted);
        } else if (r->ballot > engine_.promised()) {
            sink.reject(r->ballot);
        } else {
            host_.count(Counter::LateReplyDropped);
        }
        return;
    }
    if (const P2b* r = std::get_if<P2b>(&msg)) {
        if (r->pig) {
            send_all(pig_.on_tagged_reply(*r->pig, msg, now, sink));
        } else if (r->reject_ballot) {
            sink.reject(*r->reject_ballot);
        } else {
            sink.phase2_votes(r->slot, r->ballot, {r->voter});
        }
        return;
    }

    PaxosEngine::Effects fx;
    if (const P1a* m = std::get_if<P1a>(&msg)) {
        P1b reply = engine_.handle_p1a(*m, now, fx);
        host_.send(from, reply);
    } else if (const P2a* m = std::get_if<P2a>(&msg)) {
        P2b reply = engine_.handle_p2a(*m, now, fx);
        host_.send(from, reply);
    } else if (const P3* m = std::get_if<P3>(&msg)) {
        engine_.handle_p3(*m, from == engine_.leader_hint(), now, fx);
    } else {
        host_.count(Counter::MalformedPayload);
    }
    apply_effects(std::move(fx));
    send_all(pig_.abort_stale_aggregations(engine_.promised(), now, sink));
}

void Replica::on_client_request(uint64_t client_handle, const ClientRequest& req) {
    client_handles_[req.command.client_id] = client_handle;
    apply_effects(engine_.client_request(req.command, host_.now()));
}

void Replica::on_timer(uint64_t token) {
    const uint64_t kind = token >> 56;
    const TimeUs now = host_.now();
    Sink sink(*this);

    switch (kind) {
        case PigLayer::kRoundTimer: {
            std::vector<PigLayer::TimerReq> timers;
            send_all(pig_.on_round_deadline(PigLayer::token_seq(token), now, timers,
                                            sink));
            request_timers(std::move(timers));
            break;
        }
        case PigLayer::kRelayTimer:
            send_all(pig_.on_relay_deadline(PigLayer::token_seq(token), now, sink));
            break;
        case kElectionTimer:
            apply_effects(engine_.on_election_timeout(now));
            arm_election_timer();
            break;
        case kHeartbeatTimer:
            if (engine_.is_leader()) {
                apply_effects(engine_.on_heartbeat(now));
                host_.set_timer(now + cfg_.leader_timeout_us, kHeartbeatTimer << 56);
            }
            break;
        case kFlushTimer:
            if ((token & 0x00FFFFFFFFFFFFFFULL) == flush_epoch_)
                apply_effects(engine_.on_flush(now));
            break;
        default:
            break;
    }
}

}  // namespace pigpaxos
