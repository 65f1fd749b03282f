// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#include "pigpaxos/engine.hpp"

#include <algorithm>
#include <cassert>

#include "pigpaxos/rng.hpp"

namespace pigpaxos {

void PaxosEngine::Effects::merge(Effects&& o) {
    for (auto& b : o.broadcasts) broadcasts.push_back(std::move(b));
    for (auto& r : o.replies) replies.push_back(std::move(r));
    for (Slot s : o.committed_slots) committed_slots.push_back(s);
    became_leader |= o.became_leader;
    stepped_down |= o.stepped_down;
    schedule_flush |= o.schedule_flush;
}

PaxosEngine::PaxosEngine(const ClusterConfig& cfg, NodeId id)
    : cfg_(cfg),
      id_(id),
      majority_(cfg.majority()),
      jitter_rng_(derive_seed(cfg.seed, 0x1000u + id)) {
    if (cfg_.bootstrap_leader != kNoNode) {
        promised_ = Ballot{1, cfg_.bootstrap_leader};
        leader_hint_ = cfg_.bootstrap_leader;
        if (id_ == cfg_.bootstrap_leader) {
            role_ = Role::Leader;
            leader_ballot_ = promised_;
        }
    }
}

const LogEntry* PaxosEngine::entry(Slot s) const {
    if (s < 0 || s >= static_cast<Slot>(log_.size()) || !log_[s]) return nullptr;
    return &*log_[s];
}

std::vector<Command> PaxosEngine::executed_commands() const {
    std::vector<Command> out;
    for (Slot s = 0; s <= exec_watermark_; ++s) out.push_back(log_[s]->command);
    return out;
}

void PaxosEngine::adopt(Ballot b, TimeUs now, Effects& fx) {
    if (b < promised_) return;
    const bool higher = b > promised_;
    promised_ = b;
    leader_hint_ = b.proposer;
    last_leader_traffic_ = now;
    if (higher && role_ != Role::Follower && b.proposer != id_) step_down(now, fx);
}

void PaxosEngine::step_down(TimeUs now, Effects& fx) {
    (void)now;
    role_ = Role::Follower;
    candidate_votes_.clear();
    candidate_recovered_.clear();
    pending_.clear();
    fx.stepped_down = true;
}

P1b PaxosEngine::handle_p1a(const P1a& m, TimeUs now, Effects& fx) {
    P1b reply;
    reply.voter = id_;
    if (m.ballot >= promised_) {
        adopt(m.ballot, now, fx);
        reply.ballot = m.ballot;
        reply.accepted = report_log();
    } else {
        // Rejection: carry the higher promised ballot, no log report.
        reply.ballot = promised_;
    }
    return reply;
}

std::vector<RecoveredEntry> PaxosEngine::report_log() const {
    // Report every held entry, committed ones flagged, so a new leader can
    // adopt chosen values and re-propose the rest. Logs are in-memory and
    // bounded by the run length, so full reports stay affordable.
    std::vector<RecoveredEntry> out;
    for (Slot s = 0; s < static_cast<Slot>(log_.size()); ++s) {
        if (!log_[s]) continue;
        const LogEntry& e = *log_[s];
        out.push_back(RecoveredEntry{s, e.ballot, e.command,
                                     e.state != EntryState::Accepted});
    }
    return out;
}

void PaxosEngine::accept_entry(Slot slot, Ballot b, const Command& cmd) {
    if (slot >= static_cast<Slot>(log_.size())) log_.resize(slot + 1);
    auto& cell = log_[slot];
    if (cell && cell->state != EntryState::Accepted) {
        // Already committed locally. A conflicting command here would break
        // single-value-per-slot; never overwrite, only record the sighting.
        if (!(cell->command == cmd)) count(Counter::CommittedConflict);
        return;
    }
    cell = LogEntry{slot, b, cmd, {}, EntryState::Accepted};
    if (slot >= next_slot_) next_slot_ = slot + 1;
}

P2b PaxosEngine::handle_p2a(const P2a& m, TimeUs now, Effects& fx) {
    P2b reply;
    reply.ballot = m.ballot;
    reply.slot = m.slot;
    reply.voter = id_;
    if (m.ballot >= promised_) {
        adopt(m.ballot, now, fx);
        accept_entry(m.slot, m.ballot, m.command);
    } else {
        reply.reject_ballot = promised_;
    }
    // The watermark is applied regardless of the accept outcome: slots the
    // sender already committed are chosen facts.
    apply_watermark(m.commit_up_to, m.ballot, now, fx);
    return reply;
}

void PaxosEngine::handle_p3(const P3& m, bool refresh_liveness, TimeUs now, Effects& fx) {
    if (m.slot >= static_cast<Slot>(log_.size())) log_.resize(m.slot + 1);
    auto& cell = log_[m.slot];
    if (!cell) {
        cell = LogEntry{m.slot, promised_, m.command, {}, EntryState::Committed};
        if (m.slot >= next_slot_) next_slot_ = m.slot + 1;
    } else if (cell->state == EntryState::Accepted) {
        if (!(cell->command == m.command)) cell->command = m.command;
        cell->state = EntryState::Committed;
    } else if (!(cell->command == m.command)) {
        count(Counter::CommittedConflict);
    }
    if (refresh_liveness) last_leader_traffic_ = now;
    advance_execution(now, fx);
}

void PaxosEngine::apply_watermark(Slot up_to, Ballot b, TimeUs now, Effects& fx) {
    if (up_to < 0) return;
    const Slot cap = std::min<Slot>(up_to, static_cast<Slot>(log_.size()) - 1);
    for (Slot s = exec_watermark_ + 1; s <= cap; ++s) {
        // Commit through the watermark only where our accepted ballot matches
        // the sender's: a stale entry at this slot might not be the chosen
        // command. Mismatched slots catch up later through P3.
        if (log_[s] && log_[s]->state == EntryState::Accepted && log_[s]->ballot == b)
            log_[s]->state = EntryState::Committed;
    }
    advance_execution(now, fx);
}

void PaxosEngine::commit(Slot slot, TimeUs now, Effects& fx) {
    LogEntry& e = *log_[slot];
    if (e.state != EntryState::Accepted) return;
    e.state = EntryState::Committed;
    fx.committed_slots.push_back(slot);
    advance_execution(now, fx);
    fx.schedule_flush = true;
}

void PaxosEngine::advance_execution(TimeUs now, Effects& fx) {
    (void)now;
    while (exec_watermark_ + 1 < static_cast<Slot>(log_.size()) &&
           log_[exec_watermark_ + 1] &&
           log_[exec_watermark_ + 1]->state == EntryState::Committed) {
        const Slot slot = exec_watermark_ + 1;
        LogEntry& e = *log_[slot];
        const Command& cmd = e.command;

        ClientReply reply;
        bool emit = false;
        if (cmd.op == OpType::Noop) {
            kv_.apply(slot, cmd);
        } else {
            Session& sess = sessions_[cmd.client_id];
            if (static_cast<int64_t>(cmd.request_seq) <= sess.last_seq) {
                // Duplicate proposal of an already-executed request: consume
                // the slot without reapplying.
                Command noop;
                kv_.apply(slot, noop);
                if (static_cast<int64_t>(cmd.request_seq) == sess.last_seq) {
                    reply = sess.cached;
                    emit = true;
                }
            } else {
                ApplyResult res = kv_.apply(slot, cmd);
                reply.client_id = cmd.client_id;
                reply.request_seq = cmd.request_seq;
                reply.status = ReplyStatus::Ok;
                reply.found = res.found;
                reply.value = res.value;
                reply.leader_hint = leader_hint_;
                sess.last_seq = static_cast<int64_t>(cmd.request_seq);
                sess.cached = reply;
                emit = true;
            }
            pending_.erase(cmd.client_id);
        }
        e.state = EntryState::Executed;
        exec_watermark_ = slot;
        if (emit && role_ == Role::Leader) fx.replies.push_back(reply);
    }
}

PaxosEngine::Broadcast PaxosEngine::make_accept(Slot slot, TimeUs now) {
    const LogEntry& e = *log_[slot];
    P2a msg;
    msg.ballot = leader_ballot_;
    msg.slot = slot;
    msg.commit_up_to = exec_watermark_;
    msg.command = e.command;
    last_broadcast_ = now;
    last_accept_sent_ = now;
    return Broadcast{msg, slot, leader_ballot_, false, true};
}

PaxosEngine::Effects PaxosEngine::client_request(const Command& cmd, TimeUs now) {
    Effects fx;
    if (role_ != Role::Leader) {
        ClientReply r;
        r.client_id = cmd.client_id;
        r.request_seq = cmd.request_seq;
        r.status = ReplyStatus::NotLeader;
        r.leader_hint = leader_hint_;
        fx.replies.push_back(r);
        return fx;
    }

    auto sess = sessions_.find(cmd.client_id);
    if (sess != sessions_.end() &&
        static_cast<int64_t>(cmd.request_seq) <= sess->second.last_seq) {
        if (static_cast<int64_t>(cmd.request_seq) == sess->second.last_seq) {
            fx.replies.push_back(sess->second.cached);
        } else {
            count(Counter::StaleClientRequest);
        }
        return fx;
    }
    auto pend = pending_.find(cmd.client_id);
    if (pend != pending_.end() && pend->second.first == cmd.request_seq)
        return fx;  // already in flight; the reply follows execution

    const Slot slot = next_slot_++;
    if (slot >= static_cast<Slot>(log_.size())) log_.resize(slot + 1);
    log_[slot] = LogEntry{slot, leader_ballot_, cmd, {id_}, EntryState::Accepted};
    pending_[cmd.client_id] = {cmd.request_seq, slot};
    fx.broadcasts.push_back(make_accept(slot, now));
    return fx;
}

PaxosEngine::Effects PaxosEngine::on_vote(Slot slot, NodeId voter, Ballot ballot,
                                          TimeUs now) {
    Effects fx;
    if (role_ != Role::Leader || !(ballot == leader_ballot_)) {
        count(Counter::StaleVoteDropped);
        return fx;
    }
    LogEntry* e = (slot >= 0 && slot < static_cast<Slot>(log_.size()) && log_[slot])
                      ? &*log_[slot]
                      : nullptr;
    if (!e || !(e->ballot == ballot)) {
        count(Counter::StaleVoteDropped);
        return fx;
    }
    if (e->state != EntryState::Accepted) return;  // already committed
    e->voters.insert(voter);
    if (static_cast<int>(e->voters.size()) >= majority_) commit(slot, now, fx);
    return fx;
}

PaxosEngine::Effects PaxosEngine::on_phase1_votes(Ballot ballot,
                                                  const std::vector<NodeId>& voters,
                                                  const std::vector<RecoveredEntry>& recovered,
                                                  TimeUs now) {
    Effects fx;
    if (role_ != Role::Candidate || !(ballot == candidate_ballot_)) {
        count(Counter::StaleVoteDropped);
        return fx;
    }
    for (NodeId v : voters) candidate_votes_.insert(v);
    for (const RecoveredEntry& e : recovered) {
        auto it = candidate_recovered_.find(e.slot);
        if (it == candidate_recovered_.end()) {
            candidate_recovered_[e.slot] = e;
        } else {
            RecoveredEntry& cur = it->second;
            // Committed reports dominate; otherwise the highest ballot wins.
            if (e.committed)
                cur = e;
            else if (!cur.committed && cur.ballot < e.ballot)
                cur = e;
        }
    }
    if (static_cast<int>(candidate_votes_.size()) >= majority_) become_leader(now, fx);
    return fx;
}

void PaxosEngine::become_leader(TimeUs now, Effects& fx) {
    role_ = Role::Leader;
    leader_ballot_ = candidate_ballot_;
    leader_hint_ = id_;
    fx.became_leader = true;
    last_flushed_ = kNoSlot;  // re-disseminate the committed log when idle

    Slot max_slot = static_cast<Slot>(log_.size()) - 1;
    for (const auto& [slot, e] : candidate_recovered_) max_slot = std::max(max_slot, slot);

    for (Slot s = 0; s <= max_slot; ++s) {
        const LogEntry* own = entry(s);
        if (own && own->state != EntryState::Accepted) continue;  // already chosen

        auto rec = candidate_recovered_.find(s);
        if (rec != candidate_recovered_.end() && rec->second.committed) {
            // Adopt a chosen value directly.
            if (s >= static_cast<Slot>(log_.size())) log_.resize(s + 1);
            log_[s] = LogEntry{s, rec->second.ballot, rec->second.command, {},
                               EntryState::Committed};
            continue;
        }

        Command cmd;
        if (rec != candidate_recovered_.end()) {
            cmd = rec->second.command;  // highest-ballot report
        } else if (own) {
            cmd = own->command;
        }  // else: gap nobody reported; the no-op keeps the log dense

        log_.resize(std::max<size_t>(log_.size(), s + 1));
        log_[s] = LogEntry{s, leader_ballot_, cmd, {id_}, EntryState::Accepted};
        if (cmd.op != OpType::Noop)
            pending_[cmd.client_id] = {cmd.request_seq, s};
        fx.broadcasts.push_back(make_accept(s, now));
    }
    next_slot_ = max_slot + 1;
    advance_execution(now, fx);
    fx.schedule_flush = true;
}

PaxosEngine::Effects PaxosEngine::on_reject(Ballot higher, TimeUs now) {
    Effects fx;
    if (higher > promised_) adopt(higher, now, fx);
    if (role_ != Role::Follower && higher > leader_ballot_ && higher > candidate_ballot_)
        step_down(now, fx);
    return fx;
}

PaxosEngine::Effects PaxosEngine::on_election_timeout(TimeUs now) {
    Effects fx;
    if (role_ == Role::Leader) return fx;
    if (role_ == Role::Follower && now - last_leader_traffic_ < detect_interval())
        return fx;  // leader traffic seen recently

    // Start (or bump) a candidacy one round above everything seen so far.
    candidate_ballot_ = Ballot{promised_.round + 1, id_};
    promised_ = candidate_ballot_;
    role_ = Role::Candidate;
    candidate_votes_.clear();
    candidate_votes_.insert(id_);
    candidate_recovered_.clear();
    for (const RecoveredEntry& e : report_log()) candidate_recovered_[e.slot] = e;

    P1a msg;
    msg.ballot = candidate_ballot_;
    fx.broadcasts.push_back(Broadcast{msg, kNoSlot, candidate_ballot_, true, true});
    last_broadcast_ = now;
    return fx;
}

PaxosEngine::Effects PaxosEngine::on_heartbeat(TimeUs now) {
    Effects fx;
    if (role_ != Role::Leader) return fx;
    if (now - last_broadcast_ < cfg_.leader_timeout_us) return fx;
    last_broadcast_ = now;
    if (exec_watermark_ >= 0) {
        P3 msg;
        msg.slot = exec_watermark_;
        msg.command = log_[exec_watermark_]->command;
        fx.broadcasts.push_back(Broadcast{msg, kNoSlot, leader_ballot_, false, false});
    } else {
        // Nothing committed yet: a same-ballot leadership re-announcement
        // keeps followers from timing out.
        P1a msg;
        msg.ballot = leader_ballot_;
        fx.broadcasts.push_back(Broadcast{msg, kNoSlot, leader_ballot_, true, true});
    }
    return fx;
}

PaxosEngine::Effects PaxosEngine::on_flush(TimeUs now) {
    Effects fx;
    if (role_ != Role::Leader || exec_watermark_ <= last_flushed_) return fx;
    if (now - last_accept_sent_ < cfg_.relay_timeout_us) {
        // Recent accept traffic already carries the watermark; check again
        // after another relay-timeout of quiet.
        fx.schedule_flush = true;
        return fx;
    }
    for (Slot s = last_flushed_ + 1; s <= exec_watermark_; ++s) {
        P3 msg;
        msg.slot = s;
        msg.command = log_[s]->command;
        fx.broadcasts.push_back(Broadcast{msg, kNoSlot, leader_ballot_, false, false});
    }
    last_flushed_ = exec_watermark_;
    last_broadcast_ = now;
    return fx;
}

}  // namespace pigpaxos
