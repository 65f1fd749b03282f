// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#include "pigpaxos/bench.hpp"

#include <cstdio>
#include <sstream>

namespace pigpaxos::bench {

MetricsReport MetricsReport::from_run(const sim::RunResult& r) {
    MetricsReport m;
    m.total_ops = r.committed_ops;
    m.throughput = r.throughput();
    m.median_us = r.latency_percentile(0.50);
    m.p25_us = r.latency_percentile(0.25);
    m.p75_us = r.latency_percentile(0.75);
    m.p99_us = r.latency_percentile(0.99);
    m.retries = r.event_count(Counter::RoundRetry);
    m.relay_timeouts = r.event_count(Counter::RelayTimeoutFlush);
    m.windows = r.windows;
    m.violations = r.violations;
    return m;
}

std::string MetricsReport::to_string() const {
    std::ostringstream os;
    char buf[64];
    snprintf(buf, sizeof buf, "%.2f", throughput);
    os << "ops=" << total_ops << " throughput=" << buf << "/s median=" << median_us
       << "us iqr=[" << p25_us << "," << p75_us << "]us p99=" << p99_us
       << "us retries=" << retries << " relay_timeouts=" << relay_timeouts;
    if (!violations.empty()) os << " VIOLATIONS=" << violations.size();
    return os.str();
}

MetricsReport run_sim_clients(const ClusterConfig& cfg, const sim::NetworkProfile& profile,
                              const sim::WorkloadSpec& workload,
                              const std::vector<sim::FaultEvent>& faults) {
    sim::SimOptions opt;
    // Throughput runs are large; the safety suite covers linearizability.
    opt.check_linearizability = workload.duration_us <= 5'000'000;
    sim::RunResult r = sim::run(cfg, profile, workload, faults, opt);
    return MetricsReport::from_run(r);
}

std::vector<SweepRow> sweep_clients(const ClusterConfig& cfg,
                                    const sim::NetworkProfile& profile,
                                    const sim::WorkloadSpec& base,
                                    const std::vector<int>& client_counts) {
    std::vector<SweepRow> rows;
    for (int clients : client_counts) {
        sim::WorkloadSpec w = base;
        w.client_count = clients;
        MetricsReport m = run_sim_clients(cfg, profile, w);
        rows.push_back(SweepRow{clients, m.throughput, m.median_us, m.p25_us, m.p75_us});
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "clients,throughput,median_us,p25_us,p75_us\n";
    char buf[64];
    for (const SweepRow& r : rows) {
        snprintf(buf, sizeof buf, "%.2f", r.throughput);
        os << r.clients << "," << buf << "," << r.median_us << "," << r.p25_us << ","
           << r.p75_us << "\n";
    }
    return os.str();
}

double max_throughput(const ClusterConfig& cfg, const sim::NetworkProfile& profile,
                      sim::WorkloadSpec workload, int clients, TimeUs duration_us) {
    workload.client_count = clients;
    workload.duration_us = duration_us;
    workload.total_commands = 0;
    return run_sim_clients(cfg, profile, workload).throughput;
}

}  // namespace pigpaxos::bench
