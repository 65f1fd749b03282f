// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <string>
#include <vector>

namespace pigpaxos::sim {

struct HistoryOp;

// Checks one key's operations against a linearizable register. Incomplete
// writes may or may not have taken effect; incomplete reads are ignored.
bool check_key_linearizable(const std::vector<HistoryOp>& ops, std::string* detail);

// Partitions a mixed history by key and checks every key.
bool check_histories_linearizable(const std::vector<HistoryOp>& history,
                                  std::string* detail);

}  // namespace pigpaxos::sim
