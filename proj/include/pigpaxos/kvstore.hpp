// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "pigpaxos/types.hpp"

namespace pigpaxos {

struct ApplyResult {
    bool found = false;   // Get: key existed
    std::string value;    // Get: stored value
};

// In-memory key-value state machine: a pure fold over the committed log
// prefix. apply() must be called with consecutive slots.
class KvStore {
public:
    // Applies the command at `slot`, which must be exactly the next slot.
    // Noop commands advance the cursor without touching state.
    ApplyResult apply(Slot slot, const Command& cmd) {
        if (slot != applied_up_to_ + 1)
            throw std::logic_error("out-of-order apply: slot " + std::to_string(slot) +
                                   " after " + std::to_string(applied_up_to_));
        applied_up_to_ = slot;
        ApplyResult res;
        switch (cmd.op) {
            case OpType::Put:
                data_[cmd.key] = cmd.value;
                res.found = true;
                break;
            case OpType::Get: {
                auto it = data_.find(cmd.key);
                if (it != data_.end()) {
                    res.found = true;
                    res.value = it->second;
                }
                break;
            }
            case OpType::Noop:
                break;
        }
        return res;
    }

    Slot applied_up_to() const { return applied_up_to_; }
    size_t size() const { return data_.size(); }

    // FNV-1a over the sorted contents plus the apply cursor; equal prefixes
    // hash equal on every replica.
    uint64_t state_hash() const {
        uint64_t h = 1469598103934665603ULL;
        auto mix = [&h](const std::string& s) {
            for (unsigned char c : s) {
                h ^= c;
                h *= 1099511628211ULL;
            }
            h ^= 0xFF;
            h *= 1099511628211ULL;
        };
        for (const auto& [k, v] : data_) {
            mix(k);
            mix(v);
        }
        h ^= static_cast<uint64_t>(applied_up_to_);
        return h;
    }

private:
    std::map<std::string, std::string> data_;
    Slot applied_up_to_ = kNoSlot;
};

}  // namespace pigpaxos
