// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <string>
#include <vector>

#include "pigpaxos/sim.hpp"

namespace pigpaxos::bench {

struct MetricsReport {
    int64_t total_ops = 0;
    double throughput = 0.0;  // steady-state ops/sec
    TimeUs median_us = 0;
    TimeUs p25_us = 0;
    TimeUs p75_us = 0;
    TimeUs p99_us = 0;
    int64_t retries = 0;
    int64_t relay_timeouts = 0;
    std::map<int64_t, int64_t> windows;
    std::vector<sim::Violation> violations;

    static MetricsReport from_run(const sim::RunResult& r);
    std::string to_string() const;
};

// Closed-loop clients against the simulator backend.
MetricsReport run_sim_clients(const ClusterConfig& cfg, const sim::NetworkProfile& profile,
                              const sim::WorkloadSpec& workload,
                              const std::vector<sim::FaultEvent>& faults = {});

struct SweepRow {
    int clients = 0;
    double throughput = 0.0;
    TimeUs median_us = 0;
    TimeUs p25_us = 0;
    TimeUs p75_us = 0;
};

// One run per client count; deterministic under the config seed.
std::vector<SweepRow> sweep_clients(const ClusterConfig& cfg,
                                    const sim::NetworkProfile& profile,
                                    const sim::WorkloadSpec& base,
                                    const std::vector<int>& client_counts);

std::string sweep_csv(const std::vector<SweepRow>& rows);

// Saturated throughput with many closed-loop clients.
double max_throughput(const ClusterConfig& cfg, const sim::NetworkProfile& profile,
                      sim::WorkloadSpec workload, int clients, TimeUs duration_us);

}  // namespace pigpaxos::bench
