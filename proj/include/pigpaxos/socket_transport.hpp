// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "pigpaxos/bench.hpp"
#include "pigpaxos/replica.hpp"

namespace pigpaxos::net {

// One cluster member served over TCP. Peers hold one persistent connection
// per ordered pair, created lazily and re-established with backoff. All
// traffic for the replica funnels into the single poll loop thread; the
// replica handler is never reentered.
class SocketNode {
public:
    SocketNode(const ClusterConfig& cfg, NodeId id);
    ~SocketNode();

    SocketNode(const SocketNode&) = delete;
    SocketNode& operator=(const SocketNode&) = delete;

    // Serves until stop(); throws ConfigError when the listen address is
    // unavailable (e.g. a duplicate node id on one host).
    void run();
    void stop();

    // Valid once run() has returned.
    const Replica& replica() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Closed-loop clients over TCP, one thread each; returns aggregate metrics.
bench::MetricsReport run_socket_clients(const ClusterConfig& cfg,
                                        const sim::WorkloadSpec& workload,
                                        uint64_t client_id_base = 1000);

}  // namespace pigpaxos::net
