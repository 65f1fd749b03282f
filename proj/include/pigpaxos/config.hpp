// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <string>

#include "pigpaxos/types.hpp"

namespace pigpaxos {

// Cluster configuration file: JSON with keys `n`, `peers` (id -> address),
// `relay_groups`, `prc`, `relay_timeout_ms`, `leader_timeout_ms`,
// `graylist` {enabled, duration_ms, probe_prob} and `seed`. Optional keys:
// `bootstrap_leader`, `majority_shortcut`, `comm_mode` ("pig"/"direct"),
// `max_round_retries`.
ClusterConfig load_cluster_config(const std::string& json_text);
ClusterConfig load_cluster_config_file(const std::string& path);
std::string dump_cluster_config(const ClusterConfig& cfg);

}  // namespace pigpaxos
