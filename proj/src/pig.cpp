// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#include "pigpaxos/pig.hpp"

#include <algorithm>
#include <cassert>

#include "pigpaxos/rng.hpp"
#include "pigpaxos/wire.hpp"

namespace pigpaxos {

namespace {

void merge_recovered(std::map<Slot, RecoveredEntry>& into, const RecoveredEntry& e) {
    auto it = into.find(e.slot);
    if (it == into.end()) {
        into[e.slot] = e;
        return;
    }
    RecoveredEntry& cur = it->second;
    if (e.committed)
        cur = e;
    else if (!cur.committed && cur.ballot < e.ballot)
        cur = e;
}

}  // namespace

PigLayer::PigLayer(const ClusterConfig& cfg, NodeId id)
    : cfg_(cfg),
      id_(id),
      groups_(partition_followers(cfg.n, cfg.relay_groups, id)),
      graylist_(cfg.graylist),
      rng_(derive_seed(cfg.seed, 0x2000u + id)) {}

std::vector<NodeId> PigLayer::select_relays(TimeUs now) {
    std::vector<NodeId> picks;
    picks.reserve(groups_.group_count());
    for (const auto& group : groups_.groups) {
        std::vector<NodeId> eligible;
        bool any_gray = false;
        for (NodeId m : group) {
            if (graylist_.contains(m, now))
                any_gray = true;
            else
                eligible.push_back(m);
        }
        if (any_gray) {
            // Occasionally draw from the whole group to probe gray members.
            if (rng_unit(rng_) < graylist_.probe_probability() || eligible.empty())
                eligible = group;
        }
        picks.push_back(eligible[rng_below(rng_, eligible.size())]);
    }
    return picks;
}

std::vector<PigLayer::Send> PigLayer::make_envelopes(Round& round, TimeUs now,
                                                     std::vector<TimerReq>& timers) {
    std::vector<Send> sends;
    const std::vector<uint8_t> payload = wire::encode(round.payload);
    round.relays = select_relays(now);
    for (size_t g = 0; g < groups_.group_count(); ++g) {
        PigEnvelope env;
        env.pig_id = PigMsgId{id_, round.seq};
        env.relay = round.relays[g];
        env.group = groups_.groups[g];
        env.payload = payload;
        sends.push_back(Send{env.relay, std::move(env)});
    }
    timers.push_back(TimerReq{now + cfg_.leader_timeout_us,
                              pack_token(kRoundTimer, round.seq)});
    return sends;
}

std::vector<PigLayer::Send> PigLayer::broadcast(const Message& payload, Slot slot,
                                                Ballot ballot, bool phase1,
                                                bool expect_replies, TimeUs now,
                                                std::vector<TimerReq>& timers,
                                                int carried_retries) {
    if (!expect_replies) {
        // Fire-and-forget fan-out (commit notices, keepalives): no round state.
        std::vector<Send> sends;
        const std::vector<uint8_t> bytes = wire::encode(payload);
        std::vector<NodeId> relays = select_relays(now);
        for (size_t g = 0; g < groups_.group_count(); ++g) {
            PigEnvelope env;
            env.pig_id = PigMsgId{id_, next_seq_++};
            env.relay = relays[g];
            env.group = groups_.groups[g];
            env.payload = bytes;
            sends.push_back(Send{env.relay, std::move(env)});
        }
        return sends;
    }

    Round round;
    round.seq = next_seq_++;
    round.slot = slot;
    round.ballot = ballot;
    round.phase1 = phase1;
    round.payload = payload;
    round.retries = carried_retries;
    std::vector<Send> sends = make_envelopes(round, now, timers);
    if (!phase1) {
        auto old = round_by_slot_.find(slot);
        if (old != round_by_slot_.end()) rounds_.erase(old->second);
        round_by_slot_[slot] = round.seq;
    }
    rounds_[round.seq] = std::move(round);
    return sends;
}

void PigLayer::feed_votes(const AggregatedReply& agg, const std::vector<NodeId>& group,
                          VoteSink& sink) {
    std::vector<NodeId> voters;
    for (NodeId m : group)
        if (!std::binary_search(agg.missing_voters.begin(), agg.missing_voters.end(), m))
            voters.push_back(m);
    if (agg.slot == kNoSlot)
        sink.phase1_votes(agg.ballot, voters, agg.recovered);
    else
        sink.phase2_votes(agg.slot, agg.ballot, voters);
}

void PigLayer::on_aggregated_reply(const AggregatedReply& agg, NodeId from, TimeUs now,
                                   VoteSink& sink) {
    if (graylist_.contains(from, now)) {
        graylist_.remove(from);
        sink.count_event(Counter::GraylistProbe);
    }

    const std::vector<NodeId>* group = nullptr;
    auto it = agg.pig_id.initiator == id_ ? rounds_.find(agg.pig_id.sequence)
                                          : rounds_.end();
    if (it != rounds_.end()) {
        Round& round = it->second;
        for (size_t g = 0; g < round.relays.size(); ++g)
            if (round.relays[g] == from) {
                round.responded_groups.insert(static_cast<int>(g));
                group = &groups_.groups[g];
                break;
            }
    }
    if (!group) {
        // Stale round (already retired or replaced by a retry). Votes are
        // votes: tally them by slot and ballot via the sender's static group.
        int g = groups_.group_of(from);
        if (g < 0) {
            sink.count_event(Counter::UnknownAggregate);
            return;
        }
        group = &groups_.groups[g];
    }

    feed_votes(agg, *group, sink);
    if (agg.reject_ballot) {
        if (it != rounds_.end()) {
            if (!it->second.phase1) round_by_slot_.erase(it->second.slot);
            rounds_.erase(it);
        }
        sink.reject(*agg.reject_ballot);
    }
}

std::vector<PigLayer::Send> PigLayer::on_round_deadline(uint64_t seq, TimeUs now,
                                                        std::vector<TimerReq>& timers,
                                                        VoteSink& sink) {
    auto it = rounds_.find(seq);
    if (it == rounds_.end()) return {};  // resolved before the deadline

    Round old = std::move(it->second);
    rounds_.erase(it);
    if (!old.phase1) round_by_slot_.erase(old.slot);

    // Relays that never answered get gray-listed before the fresh draw.
    for (size_t g = 0; g < old.relays.size(); ++g) {
        if (old.responded_groups.count(static_cast<int>(g))) continue;
        graylist_.insert(old.relays[g], now);
        sink.count_event(Counter::GraylistInsert);
    }

    sink.count_event(Counter::RoundRetry);
    const int retries = old.retries + 1;
    if (retries > cfg_.max_round_retries) {
        sink.count_event(Counter::RetryAlarm);
        sink.alarm_round(old.slot, retries);
    }
    return broadcast(old.payload, old.slot, old.ballot, old.phase1, true, now, timers,
                     retries);
}

void PigLayer::close_round_for_slot(Slot slot) {
    auto it = round_by_slot_.find(slot);
    if (it == round_by_slot_.end()) return;
    rounds_.erase(it->second);
    round_by_slot_.erase(it);
}

void PigLayer::close_phase1_rounds() {
    for (auto it = rounds_.begin(); it != rounds_.end();)
        it = it->second.phase1 ? rounds_.erase(it) : std::next(it);
}

void PigLayer::close_all_rounds() {
    rounds_.clear();
    round_by_slot_.clear();
}

std::vector<PigLayer::Send> PigLayer::relay_fanout(const PigEnvelope& env,
                                                   bool expect_replies, Ballot ballot,
                                                   Slot slot, bool phase1, TimeUs now,
                                                   std::vector<TimerReq>& timers) {
    std::vector<Send> sends;
    for (NodeId m : env.group)
        if (m != id_) sends.push_back(Send{m, env});

    if (expect_replies) {
        Pending p;
        p.id = env.pig_id;
        p.ballot = ballot;
        p.slot = slot;
        p.phase1 = phase1;
        p.local_seq = next_local_seq_++;
        p.expected = env.group;
        int threshold = static_cast<int>(env.group.size()) - cfg_.prc;
        if (threshold < 0) threshold = 0;
        if (cfg_.majority_shortcut &&
            static_cast<int>(env.group.size()) == cfg_.n - 1) {
            // Single relay group: this relay sees every follower reply, so it
            // may answer as soon as group acks plus the initiator's own vote
            // form a majority.
            threshold = std::min(threshold, cfg_.majority() - 1);
        }
        p.threshold = threshold;
        timers.push_back(TimerReq{now + cfg_.relay_timeout_us,
                                  pack_token(kRelayTimer, p.local_seq)});
        pending_by_id_[p.id] = p.local_seq;
        pendings_[p.local_seq] = std::move(p);
    }
    return sends;
}

std::vector<PigLayer::Send> PigLayer::flush(Pending& p, std::optional<Ballot> reject,
                                            TimeUs now, VoteSink* sink) {
    (void)now;
    AggregatedReply agg;
    agg.pig_id = p.id;
    agg.ballot = p.ballot;
    agg.slot = p.phase1 ? kNoSlot : p.slot;
    agg.ack_count = static_cast<uint16_t>(p.acks.size());
    for (NodeId m : p.expected)
        if (!p.acks.count(m)) agg.missing_voters.push_back(m);
    assert(agg.ack_count + agg.missing_voters.size() == p.expected.size());
    agg.reject_ballot = reject;
    for (auto& [_, e] : p.recovered) agg.recovered.push_back(e);

    std::vector<Send> sends;
    sends.push_back(Send{p.id.initiator, std::move(agg)});
    pending_by_id_.erase(p.id);
    pendings_.erase(p.local_seq);
    (void)sink;
    return sends;
}

std::vector<PigLayer::Send> PigLayer::maybe_flush(Pending& p, TimeUs now,
                                                  VoteSink& sink) {
    if (static_cast<int>(p.acks.size()) >= p.threshold)
        return flush(p, std::nullopt, now, &sink);
    return {};
}

std::vector<PigLayer::Send> PigLayer::record_local_reply(const PigMsgId& id,
                                                         const Message& reply,
                                                         TimeUs now, VoteSink& sink) {
    return on_tagged_reply(id, reply, now, sink);
}

std::vector<PigLayer::Send> PigLayer::on_tagged_reply(const PigMsgId& id,
                                                      const Message& reply, TimeUs now,
                                                      VoteSink& sink) {
    auto idx = pending_by_id_.find(id);
    if (idx == pending_by_id_.end()) {
        sink.count_event(Counter::LateReplyDropped);
        return {};
    }
    Pending& p = pendings_.at(idx->second);

    if (const P2b* r = std::get_if<P2b>(&reply)) {
        if (r->reject_ballot) return flush(p, r->reject_ballot, now, &sink);
        if (r->ballot == p.ballot && r->slot == p.slot) {
            p.acks.insert(r->voter);
            return maybe_flush(p, now, sink);
        }
        sink.count_event(Counter::LateReplyDropped);
        return {};
    }
    if (const P1b* r = std::get_if<P1b>(&reply)) {
        if (r->ballot == p.ballot) {
            p.acks.insert(r->voter);
            for (const RecoveredEntry& e : r->accepted) merge_recovered(p.recovered, e);
            return maybe_flush(p, now, sink);
        }
        if (p.ballot < r->ballot) return flush(p, r->ballot, now, &sink);
        sink.count_event(Counter::LateReplyDropped);
        return {};
    }
    sink.count_event(Counter::LateReplyDropped);
    return {};
}

std::vector<PigLayer::Send> PigLayer::on_relay_deadline(uint64_t local_seq, TimeUs now,
                                                        VoteSink& sink) {
    auto it = pendings_.find(local_seq);
    if (it == pendings_.end()) return {};
    sink.count_event(Counter::RelayTimeoutFlush);
    return flush(it->second, std::nullopt, now, &sink);
}

std::vector<PigLayer::Send> PigLayer::abort_stale_aggregations(Ballot promoted,
                                                               TimeUs now,
                                                               VoteSink& sink) {
    std::vector<uint64_t> stale;
    for (auto& [seq, p] : pendings_)
        if (p.ballot < promoted) stale.push_back(seq);
    std::vector<Send> sends;
    for (uint64_t seq : stale) {
        auto it = pendings_.find(seq);
        if (it == pendings_.end()) continue;
        for (auto& s : flush(it->second, promoted, now, &sink)) sends.push_back(std::move(s));
    }
    return sends;
}

}  // namespace pigpaxos
