// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#include "pigpaxos/types.hpp"

namespace pigpaxos {

RelayGroupConfig partition_followers(int n, int relay_groups, NodeId leader) {
    if (n < 2) throw ConfigError("cluster must have at least 2 nodes");
    if (leader >= n) throw ConfigError("leader id out of range");
    if (relay_groups < 1 || relay_groups > n - 1)
        throw ConfigError("relay group count must be in [1, n-1], got " +
                          std::to_string(relay_groups));

    std::vector<NodeId> followers;
    followers.reserve(n - 1);
    for (int id = 0; id < n; ++id)
        if (id != leader) followers.push_back(static_cast<NodeId>(id));

    const int total = n - 1;
    const int base = total / relay_groups;
    const int extra = total % relay_groups;  // first `extra` groups get one more

    RelayGroupConfig cfg;
    cfg.groups.resize(relay_groups);
    size_t next = 0;
    for (int g = 0; g < relay_groups; ++g) {
        const int size = base + (g < extra ? 1 : 0);
        for (int k = 0; k < size; ++k) cfg.groups[g].push_back(followers[next++]);
    }
    return cfg;
}

void ClusterConfig::validate() const {
    if (n < 2) throw ConfigError("n must be >= 2");
    if (relay_groups < 1 || relay_groups > n - 1)
        throw ConfigError("relay_groups must be in [1, n-1]");
    if (prc < 0) throw ConfigError("prc must be >= 0");
    if (relay_timeout_us <= 0 || leader_timeout_us <= 0)
        throw ConfigError("timeouts must be positive");
    if (relay_timeout_us >= leader_timeout_us)
        throw ConfigError("relay timeout must be strictly below leader timeout");
    if (graylist.probe_probability < 0.0 || graylist.probe_probability > 1.0)
        throw ConfigError("probe probability must be in [0, 1]");
    if (bootstrap_leader != kNoNode && bootstrap_leader >= n)
        throw ConfigError("bootstrap leader id out of range");
    if (!node_ids.empty() && static_cast<int>(node_ids.size()) != n)
        throw ConfigError("node_ids size must match n");
}

}  // namespace pigpaxos
