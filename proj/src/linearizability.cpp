// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#include "pigpaxos/linearizability.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <unordered_set>

#include "pigpaxos/sim.hpp"

namespace pigpaxos::sim {

namespace {

constexpr int64_t kNever = std::numeric_limits<int64_t>::max();

struct Op {
    int64_t invoke = 0;
    int64_t complete = kNever;  // kNever while pending
    bool is_put = false;
    std::string value;       // Put payload
    bool ret_found = false;  // Get result
    std::string ret_value;
    bool completed = false;
};

struct StateKey {
    std::vector<uint64_t> mask;
    int last_put = -1;

    bool operator==(const StateKey& o) const {
        return last_put == o.last_put && mask == o.mask;
    }
};

struct StateKeyHash {
    size_t operator()(const StateKey& k) const {
        uint64_t h = 1469598103934665603ULL ^ static_cast<uint64_t>(k.last_put + 2);
        for (uint64_t w : k.mask) {
            h ^= w;
            h *= 1099511628211ULL;
        }
        return static_cast<size_t>(h);
    }
};

class Search {
public:
    explicit Search(std::vector<Op> ops) : ops_(std::move(ops)) {
        words_ = (ops_.size() + 63) / 64;
        complete_count_ = 0;
        for (const Op& op : ops_)
            if (op.completed) ++complete_count_;
    }

    bool linearizable() {
        StateKey init;
        init.mask.assign(words_, 0);
        return dfs(init, 0) && !budget_exhausted_;
    }

    bool budget_exhausted() const { return budget_exhausted_; }

private:
    static bool test(const std::vector<uint64_t>& mask, size_t i) {
        return (mask[i / 64] >> (i % 64)) & 1;
    }
    static void set(std::vector<uint64_t>& mask, size_t i) {
        mask[i / 64] |= 1ull << (i % 64);
    }

    bool dfs(const StateKey& state, size_t chosen_complete) {
        if (chosen_complete == complete_count_) return true;
        if (!visited_.insert(state).second) return false;
        if (++expanded_ > kBudget) {
            budget_exhausted_ = true;
            return true;  // overridden by budget_exhausted() at the top level
        }

        // Real-time frontier: nothing may linearize after an unchosen
        // completed op has already responded.
        int64_t frontier = kNever;
        for (size_t i = 0; i < ops_.size(); ++i)
            if (!test(state.mask, i) && ops_[i].completed)
                frontier = std::min(frontier, ops_[i].complete);

        for (size_t i = 0; i < ops_.size(); ++i) {
            if (test(state.mask, i)) continue;
            const Op& op = ops_[i];
            if (op.invoke > frontier) continue;
            if (!op.is_put) {
                const bool init = state.last_put < 0;
                const bool ok = init ? !op.ret_found
                                     : op.ret_found &&
                                           op.ret_value == ops_[state.last_put].value;
                if (!ok) continue;
            }
            StateKey next = state;
            set(next.mask, i);
            if (op.is_put) next.last_put = static_cast<int>(i);
            if (dfs(next, chosen_complete + (op.completed ? 1 : 0))) return true;
            if (budget_exhausted_) return true;
        }
        return false;
    }

    static constexpr size_t kBudget = 5'000'000;
    std::vector<Op> ops_;
    size_t words_ = 0;
    size_t complete_count_ = 0;
    size_t expanded_ = 0;
    bool budget_exhausted_ = false;
    std::unordered_set<StateKey, StateKeyHash> visited_;
};

}  // namespace

bool check_key_linearizable(const std::vector<HistoryOp>& history, std::string* detail) {
    std::vector<Op> ops;
    for (const HistoryOp& h : history) {
        if (!h.completed && h.op == OpType::Get) continue;  // a lost read constrains nothing
        Op op;
        op.invoke = h.invoke;
        op.complete = h.completed ? h.complete : kNever;
        op.completed = h.completed;
        op.is_put = h.op == OpType::Put;
        op.value = h.value;
        op.ret_found = h.result_found;
        op.ret_value = h.result_value;
        ops.push_back(std::move(op));
    }
    std::sort(ops.begin(), ops.end(), [](const Op& a, const Op& b) {
        if (a.invoke != b.invoke) return a.invoke < b.invoke;
        return a.complete < b.complete;
    });

    Search search(std::move(ops));
    const bool ok = search.linearizable();
    if (search.budget_exhausted()) {
        if (detail) *detail = "checker state budget exhausted";
        return false;
    }
    if (!ok && detail) *detail = "no valid linearization";
    return ok;
}

bool check_histories_linearizable(const std::vector<HistoryOp>& history,
                                  std::string* detail) {
    std::map<std::string, std::vector<HistoryOp>> by_key;
    for (const HistoryOp& h : history) by_key[h.key].push_back(h);
    for (const auto& [key, ops] : by_key) {
        std::string key_detail;
        if (!check_key_linearizable(ops, &key_detail)) {
            if (detail) *detail = "key " + key + ": " + key_detail;
            return false;
        }
    }
    return true;
}

}  // namespace pigpaxos::sim
