// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#include "pigpaxos/sim.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

#include "pigpaxos/linearizability.hpp"
#include "pigpaxos/rng.hpp"
#include "pigpaxos/wire.hpp"

namespace pigpaxos::sim {

void WorkloadSpec::validate() const {
    if (key_space < 1) throw ConfigError("key_space must be >= 1");
    if (read_fraction < 0.0 || read_fraction > 1.0)
        throw ConfigError("read_fraction must be in [0, 1]");
    if (payload_bytes < 8 || payload_bytes > 1280)
        throw ConfigError("payload_bytes must be in [8, 1280]");
    if (client_count < 0) throw ConfigError("client_count must be >= 0");
    if (duration_us == 0 && total_commands == 0)
        throw ConfigError("need a duration or a command quota");
}

int64_t RunResult::event_count(Counter c) const {
    int64_t total = 0;
    for (const NodeCounters& n : nodes) {
        auto it = n.events.find(c);
        if (it != n.events.end()) total += it->second;
    }
    return total;
}

double RunResult::throughput() const {
    if (windows.empty()) return 0.0;
    const int64_t last = windows.rbegin()->first;
    if (last >= 2) {
        // Steady state: full seconds, first second dropped as warmup.
        int64_t ops = 0;
        for (const auto& [sec, n] : windows)
            if (sec >= 1 && sec < last) ops += n;
        return static_cast<double>(ops) / static_cast<double>(last - 1);
    }
    return committed_ops / (static_cast<double>(end_us) / 1e6);
}

TimeUs RunResult::latency_percentile(double p) const {
    if (latencies_us.empty()) return 0;
    std::vector<TimeUs> sorted = latencies_us;
    std::sort(sorted.begin(), sorted.end());
    size_t rank = static_cast<size_t>(p * (sorted.size() - 1) + 0.5);
    return sorted[std::min(rank, sorted.size() - 1)];
}

std::string RunResult::to_csv() const {
    std::ostringstream os;
    os << "metric,value\n";
    os << "committed_ops," << committed_ops << "\n";
    os << "cluster_sends," << cluster_sends << "\n";
    os << "cluster_received," << cluster_received << "\n";
    os << "dropped," << dropped << "\n";
    os << "in_flight_at_end," << in_flight_at_end << "\n";
    os << "last_reply_us," << last_reply_us << "\n";
    os << "end_us," << end_us << "\n";
    os << "final_leader," << (final_leader == kNoNode ? -1 : (int)final_leader) << "\n";
    os << "retries," << event_count(Counter::RoundRetry) << "\n";
    os << "relay_timeouts," << event_count(Counter::RelayTimeoutFlush) << "\n";
    os << "latency_p25_us," << latency_percentile(0.25) << "\n";
    os << "latency_p50_us," << latency_percentile(0.50) << "\n";
    os << "latency_p75_us," << latency_percentile(0.75) << "\n";
    os << "latency_p99_us," << latency_percentile(0.99) << "\n";
    os << "violations," << violations.size() << "\n";
    os << "node,id,sent,received,handled\n";
    for (size_t i = 0; i < nodes.size(); ++i)
        os << "node," << i << "," << nodes[i].sent << "," << nodes[i].received << ","
           << nodes[i].handled() << "\n";
    os << "window,second,ops\n";
    for (const auto& [sec, n] : windows) os << "window," << sec << "," << n << "\n";
    for (const auto& v : violations)
        os << "violation," << v.invariant << "," << v.at << "," << v.detail << "\n";
    return os.str();
}

namespace {

constexpr uint64_t kClientTimer = 6;

struct Event {
    TimeUs time = 0;
    uint64_t sender = 0;
    uint64_t seq = 0;
    enum Kind : uint8_t { Delivery, Timer, Fault, Issue } kind = Delivery;
    uint64_t to = 0;
    uint64_t token = 0;  // timer token / fault index
    Message msg;
    bool cluster_origin = false;
};

struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        if (a.sender != b.sender) return a.sender > b.sender;
        return a.seq > b.seq;
    }
};

struct ClientState {
    uint64_t entity = 0;
    std::mt19937_64 rng;
    uint64_t next_seq = 1;
    bool outstanding = false;
    Command current;
    TimeUs issued_at = 0;
    NodeId target = 0;
    size_t history_index = 0;
    bool done = false;
};

class Simulation;

struct ReplicaHost : Host {
    Simulation* sim = nullptr;
    NodeId node = 0;

    TimeUs now() const override;
    void send(NodeId to, const Message& msg) override;
    void reply_client(uint64_t client, const ClientReply& reply) override;
    void set_timer(TimeUs at, uint64_t token) override;
    void count(Counter c) override;
    void observe_commit(Slot slot, const Command& cmd) override;
    void alarm(Slot slot, int retries) override;
};

class Simulation {
public:
    Simulation(const ClusterConfig& cfg, const NetworkProfile& profile,
               const WorkloadSpec& workload, const std::vector<FaultEvent>& faults,
               const SimOptions& options)
        : cfg_(cfg),
          profile_(profile),
          workload_(workload),
          faults_(faults),
          options_(options),
          net_rng_(derive_seed(cfg.seed, 0x9000)) {
        cfg_.validate();
        workload_.validate();

        result_.nodes.resize(cfg_.n);
        cpu_free_.assign(cfg_.n + workload_.client_count, 0);
        crashed_.assign(cfg_.n, false);

        hosts_.reserve(cfg_.n);
        for (int i = 0; i < cfg_.n; ++i) {
            auto host = std::make_unique<ReplicaHost>();
            host->sim = this;
            host->node = static_cast<NodeId>(i);
            hosts_.push_back(std::move(host));
        }
        for (int i = 0; i < cfg_.n; ++i)
            replicas_.push_back(std::make_unique<Replica>(cfg_, static_cast<NodeId>(i),
                                                          *hosts_[i]));

        for (int k = 0; k < workload_.client_count; ++k) {
            ClientState c;
            c.entity = cfg_.n + k;
            c.rng.seed(derive_seed(cfg_.seed, 0x8000 + k));
            c.target = cfg_.bootstrap_leader != kNoNode ? cfg_.bootstrap_leader : 0;
            clients_.push_back(std::move(c));
        }
    }

    RunResult run() {
        current_now_ = 0;
        for (auto& r : replicas_) {
            dispatch_node_ = r->id();
            r->start();
        }
        for (size_t i = 0; i < faults_.size(); ++i)
            push(Event{faults_[i].at, 1ull << 62, next_seq_++, Event::Fault, 0, i, {}, false});
        for (auto& c : clients_)
            push(Event{0, c.entity, next_seq_++, Event::Issue, c.entity, 0, {}, false});

        const TimeUs hard_cap =
            workload_.duration_us > 0 ? workload_.duration_us : 600'000'000;
        const bool quota_mode = workload_.total_commands > 0;

        while (!queue_.empty()) {
            const Event& top = queue_.top();
            if (quota_mode && completions_ >= workload_.total_commands &&
                top.time > result_.last_reply_us + options_.drain_us)
                break;
            if (top.time > hard_cap) break;
            Event ev = top;
            queue_.pop();
            dispatch(ev);
        }
        finalize();
        return std::move(result_);
    }

    // ---- host callbacks -------------------------------------------------------

    TimeUs now() const { return current_now_; }

    void node_send(NodeId from, NodeId to, const Message& msg) {
        result_.nodes[from].sent++;
        result_.cluster_sends++;
        cpu_free_[from] += cpu_cost(msg);
        const TimeUs depart = cpu_free_[from];
        route(from, to, msg, depart, true);
    }

    void node_send_client(NodeId from, uint64_t client_entity, const ClientReply& reply) {
        result_.nodes[from].sent++;
        result_.cluster_sends++;
        Message msg = reply;
        cpu_free_[from] += cpu_cost(msg);
        const TimeUs depart = cpu_free_[from];
        if (client_entity < static_cast<uint64_t>(cfg_.n) ||
            client_entity >= cpu_free_.size()) {
            ++result_.dropped;
            return;
        }
        push(Event{depart + latency(from, -1), from, next_seq_++, Event::Delivery,
                   client_entity, 0, std::move(msg), true});
        ++tracked_in_flight_;
    }

    void set_node_timer(NodeId node, TimeUs at, uint64_t token) {
        push(Event{std::max(at, current_now_), node, next_seq_++, Event::Timer, node,
                   token, {}, false});
    }

    void count_node(NodeId node, Counter c) { result_.nodes[node].events[c]++; }

    void on_commit(NodeId node, Slot slot, const Command& cmd) {
        (void)node;
        auto it = chosen_.find(slot);
        if (it == chosen_.end()) {
            chosen_[slot] = cmd;
        } else if (!(it->second == cmd)) {
            violation("single-value-per-slot",
                      "slot " + std::to_string(slot) + " committed twice with different commands");
        }
    }

    void on_alarm(NodeId node, Slot slot, int retries) {
        violation("retry-alarm", "node " + std::to_string(node) + " slot " +
                                     std::to_string(slot) + " exceeded " +
                                     std::to_string(retries - 1) + " retries");
    }

private:
    void violation(const std::string& inv, const std::string& detail) {
        result_.violations.push_back(Violation{inv, current_now_, detail});
    }

    void push(Event ev) { queue_.push(std::move(ev)); }

    int64_t cpu_cost(const Message& msg) const {
        return profile_.cpu_base_us +
               profile_.cpu_per_100_bytes_us *
                   static_cast<int64_t>(wire::encoded_size(msg) / 100);
    }

    TimeUs latency(int from, int to) {
        TimeUs lo = profile_.latency_lo_us, hi = profile_.latency_hi_us;
        for (const auto& l : profile_.links) {
            if ((l.from == -1 || l.from == from) && (l.to == -1 || l.to == to)) {
                lo = l.lo;
                hi = l.hi;
                break;
            }
        }
        return rng_range(net_rng_, lo, hi);
    }

    bool partitioned(NodeId a, NodeId b) const {
        for (const auto& side : partitions_) {
            const bool in_a = std::binary_search(side.begin(), side.end(), a);
            const bool in_b = std::binary_search(side.begin(), side.end(), b);
            if (in_a != in_b) return true;
        }
        return false;
    }

    void route(NodeId from, NodeId to, const Message& msg, TimeUs depart,
               bool cluster_origin) {
        if (to >= cfg_.n) {
            ++result_.dropped;
            return;
        }
        if (crashed_[to] || partitioned(from, to)) {
            ++result_.dropped;
            return;
        }
        if (profile_.drop_probability > 0.0 &&
            rng_unit(net_rng_) < profile_.drop_probability) {
            ++result_.dropped;
            return;
        }
        push(Event{depart + latency(from, to), from, next_seq_++, Event::Delivery, to, 0,
                   msg, cluster_origin});
        ++tracked_in_flight_;
    }

    void client_send(ClientState& c, const Message& msg) {
        const NodeId to = c.target;
        if (to >= cfg_.n) return;
        // Client links are reliable; crashes still eat the message.
        TimeUs depart = current_now_;
        if (crashed_[to]) return;
        push(Event{depart + latency(-1, to), c.entity, next_seq_++, Event::Delivery, to,
                   0, msg, false});
    }

    // ---- event dispatch ---------------------------------------------------------

    void dispatch(Event& ev) {
        switch (ev.kind) {
            case Event::Delivery: dispatch_delivery(ev); break;
            case Event::Timer: dispatch_timer(ev); break;
            case Event::Fault: dispatch_fault(ev); break;
            case Event::Issue: {
                ClientState& c = clients_[ev.to - cfg_.n];
                current_now_ = ev.time;
                issue_next(c);
                break;
            }
        }
    }

    void dispatch_delivery(Event& ev) {
        if (ev.cluster_origin) --tracked_in_flight_;
        if (ev.to < static_cast<uint64_t>(cfg_.n)) {
            const NodeId node = static_cast<NodeId>(ev.to);
            if (crashed_[node]) {
                ++result_.dropped;
                return;
            }
            const TimeUs start = std::max(ev.time, cpu_free_[node]);
            cpu_free_[node] = start + cpu_cost(ev.msg);
            current_now_ = cpu_free_[node];
            dispatch_node_ = node;
            result_.nodes[node].received++;
            if (ev.cluster_origin) result_.cluster_received++;

            if (const ClientRequest* req = std::get_if<ClientRequest>(&ev.msg)) {
                replicas_[node]->on_client_request(ev.sender, *req);
            } else {
                replicas_[node]->on_message(static_cast<NodeId>(ev.sender), ev.msg);
            }
            return;
        }
        // Client delivery: zero processing cost.
        current_now_ = ev.time;
        ClientState& c = clients_[ev.to - cfg_.n];
        if (const ClientReply* reply = std::get_if<ClientReply>(&ev.msg))
            client_on_reply(c, *reply);
    }

    void dispatch_timer(Event& ev) {
        if (ev.to < static_cast<uint64_t>(cfg_.n)) {
            const NodeId node = static_cast<NodeId>(ev.to);
            if (crashed_[node]) return;  // timers are lost while down
            const TimeUs start = std::max(ev.time, cpu_free_[node]);
            current_now_ = start;
            cpu_free_[node] = start;
            dispatch_node_ = node;
            replicas_[node]->on_timer(ev.token);
            return;
        }
        current_now_ = ev.time;
        ClientState& c = clients_[ev.to - cfg_.n];
        client_on_timeout(c, ev.token);
    }

    void dispatch_fault(Event& ev) {
        current_now_ = ev.time;
        const FaultEvent& f = faults_[ev.token];
        switch (f.action) {
            case FaultAction::Crash:
                for (NodeId n : f.nodes)
                    if (n < cfg_.n) crashed_[n] = true;
                break;
            case FaultAction::Recover:
                for (NodeId n : f.nodes) {
                    if (n >= cfg_.n || !crashed_[n]) continue;
                    crashed_[n] = false;
                    dispatch_node_ = n;
                    replicas_[n]->on_recover();
                }
                break;
            case FaultAction::Partition: {
                std::vector<NodeId> side = f.nodes;
                std::sort(side.begin(), side.end());
                partitions_.push_back(std::move(side));
                break;
            }
            case FaultAction::Heal:
                if (f.nodes.empty()) {
                    partitions_.clear();
                } else {
                    std::vector<NodeId> side = f.nodes;
                    std::sort(side.begin(), side.end());
                    std::erase(partitions_, side);
                }
                break;
        }
    }

    // ---- closed-loop clients -----------------------------------------------------

    void issue_next(ClientState& c) {
        if (c.done || c.outstanding) return;
        if (workload_.duration_us > 0 && current_now_ >= workload_.duration_us) {
            c.done = true;
            return;
        }
        if (workload_.total_commands > 0 && issued_ >= workload_.total_commands) {
            c.done = true;
            return;
        }
        ++issued_;

        Command cmd;
        cmd.client_id = c.entity;
        cmd.request_seq = c.next_seq++;
        const uint64_t key = rng_below(c.rng, static_cast<uint64_t>(workload_.key_space));
        char keybuf[16];
        snprintf(keybuf, sizeof keybuf, "k%06llu", static_cast<unsigned long long>(key));
        cmd.key = keybuf;
        if (rng_unit(c.rng) < workload_.read_fraction) {
            cmd.op = OpType::Get;
        } else {
            cmd.op = OpType::Put;
            // Unique 8-byte tag, padded to the configured payload size.
            std::string v(std::max(8, workload_.payload_bytes), 'x');
            const uint32_t cid = static_cast<uint32_t>(c.entity);
            const uint32_t seq = static_cast<uint32_t>(cmd.request_seq);
            for (int i = 0; i < 4; ++i) {
                v[i] = static_cast<char>((cid >> (8 * (3 - i))) & 0xFF);
                v[4 + i] = static_cast<char>((seq >> (8 * (3 - i))) & 0xFF);
            }
            cmd.value = std::move(v);
        }

        c.current = cmd;
        c.outstanding = true;
        c.issued_at = current_now_;

        HistoryOp op;
        op.client = c.entity;
        op.key = cmd.key;
        op.op = cmd.op;
        op.value = cmd.value;
        op.invoke = current_now_;
        c.history_index = result_.history.size();
        result_.history.push_back(std::move(op));

        client_send(c, ClientRequest{cmd});
        push(Event{current_now_ + workload_.client_timeout_us, c.entity, next_seq_++,
                   Event::Timer, c.entity, cmd.request_seq, {}, false});
    }

    void client_on_reply(ClientState& c, const ClientReply& reply) {
        if (!c.outstanding || reply.request_seq != c.current.request_seq) return;
        if (reply.status == ReplyStatus::NotLeader) {
            c.target = reply.leader_hint != kNoNode && reply.leader_hint < cfg_.n
                           ? reply.leader_hint
                           : static_cast<NodeId>((c.target + 1) % cfg_.n);
            client_send(c, ClientRequest{c.current});
            return;
        }
        if (reply.status != ReplyStatus::Ok) return;

        c.outstanding = false;
        const TimeUs latency = current_now_ - c.issued_at;
        result_.latencies_us.push_back(latency);
        result_.windows[current_now_ / 1'000'000]++;
        result_.committed_ops++;
        ++completions_;
        result_.last_reply_us = std::max(result_.last_reply_us, current_now_);

        HistoryOp& op = result_.history[c.history_index];
        op.complete = current_now_;
        op.completed = true;
        op.result_found = reply.found;
        op.result_value = reply.value;

        if (workload_.target_rate > 0.0) {
            const TimeUs think = static_cast<TimeUs>(
                workload_.client_count * 1e6 / workload_.target_rate);
            push(Event{current_now_ + think, c.entity, next_seq_++, Event::Issue,
                       c.entity, 0, {}, false});
        } else {
            issue_next(c);
        }
    }

    void client_on_timeout(ClientState& c, uint64_t seq) {
        if (c.done || !c.outstanding || c.current.request_seq != seq) return;
        // Retry the same request; rotating the target copes with dead leaders.
        c.target = static_cast<NodeId>((c.target + 1) % cfg_.n);
        client_send(c, ClientRequest{c.current});
        push(Event{current_now_ + workload_.client_timeout_us, c.entity, next_seq_++,
                   Event::Timer, c.entity, seq, {}, false});
    }

    // ---- wrap-up -------------------------------------------------------------------

    void finalize() {
        result_.end_us = current_now_;
        result_.in_flight_at_end = tracked_in_flight_;

        Ballot best;
        for (auto& r : replicas_) {
            result_.state_hashes.push_back(r->engine().kv().state_hash());
            if (r->engine().is_leader() && best < r->engine().leader_ballot()) {
                best = r->engine().leader_ballot();
                result_.final_leader = r->id();
            }
        }
        if (options_.capture_logs) {
            for (auto& r : replicas_)
                result_.executed.push_back(r->engine().executed_commands());
            if (result_.final_leader != kNoNode) {
                const PaxosEngine& eng = replicas_[result_.final_leader]->engine();
                for (Slot s = 0; s < static_cast<Slot>(eng.log_size()); ++s) {
                    const LogEntry* e = eng.entry(s);
                    if (!e) continue;
                    result_.leader_tally[s] =
                        std::vector<NodeId>(e->voters.begin(), e->voters.end());
                }
            }
        }

        // Executed prefixes must agree with the globally chosen commands.
        for (auto& r : replicas_) {
            const PaxosEngine& eng = r->engine();
            for (Slot s = 0; s <= eng.executed_up_to(); ++s) {
                auto it = chosen_.find(s);
                if (it != chosen_.end() && !(it->second == eng.entry(s)->command)) {
                    violation("agreement", "node " + std::to_string(r->id()) +
                                               " executed a non-chosen command at slot " +
                                               std::to_string(s));
                }
            }
        }

        if (options_.check_linearizability) {
            std::string detail;
            if (!check_histories_linearizable(result_.history, &detail))
                violation("linearizability", detail);
        }
    }

    ClusterConfig cfg_;
    NetworkProfile profile_;
    WorkloadSpec workload_;
    std::vector<FaultEvent> faults_;
    SimOptions options_;

    std::vector<std::unique_ptr<ReplicaHost>> hosts_;
    std::vector<std::unique_ptr<Replica>> replicas_;
    std::vector<ClientState> clients_;

    std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
    uint64_t next_seq_ = 0;
    std::mt19937_64 net_rng_;

    std::vector<TimeUs> cpu_free_;
    std::vector<bool> crashed_;
    std::vector<std::vector<NodeId>> partitions_;

    TimeUs current_now_ = 0;
    NodeId dispatch_node_ = 0;
    int64_t issued_ = 0;
    int64_t completions_ = 0;
    int64_t tracked_in_flight_ = 0;

    std::map<Slot, Command> chosen_;
    RunResult result_;

    friend struct ReplicaHost;
};

TimeUs ReplicaHost::now() const { return sim->now(); }
void ReplicaHost::send(NodeId to, const Message& msg) { sim->node_send(node, to, msg); }
void ReplicaHost::reply_client(uint64_t client, const ClientReply& reply) {
    sim->node_send_client(node, client, reply);
}
void ReplicaHost::set_timer(TimeUs at, uint64_t token) {
    sim->set_node_timer(node, at, token);
}
void ReplicaHost::count(Counter c) { sim->count_node(node, c); }
void ReplicaHost::observe_commit(Slot slot, const Command& cmd) {
    sim->on_commit(node, slot, cmd);
}
void ReplicaHost::alarm(Slot slot, int retries) { sim->on_alarm(node, slot, retries); }

}  // namespace

RunResult run(const ClusterConfig& cfg, const NetworkProfile& profile,
              const WorkloadSpec& workload, const std::vector<FaultEvent>& faults,
              const SimOptions& options) {
    Simulation s(cfg, profile, workload, faults, options);
    return s.run();
}

}  // namespace pigpaxos::sim
