// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "pigpaxos/sim.hpp"

namespace pigpaxos::sim {

// A self-contained simulation scenario: cluster config, network profile,
// workload, optional fault script, and either a single run, a relay-group
// sweep or a list of config variants.
struct Scenario {
    std::string name;
    ClusterConfig config;
    NetworkProfile profile;
    WorkloadSpec workload;
    std::vector<FaultEvent> faults;
    std::vector<int> sweep_r;
    struct Variant {
        std::string name;
        std::string overrides_json;
    };
    std::vector<Variant> variants;
    std::string out_path;  // optional CSV destination
};

Scenario load_scenario(const std::string& json_text);
Scenario load_scenario_file(const std::string& path);

struct ScenarioOutcome {
    bool ok = true;  // no invariant violations in any run
    std::string csv;
    std::string summary;
    std::vector<Violation> violations;
};

ScenarioOutcome run_scenario(const Scenario& sc);

NetworkProfile load_profile_json(const std::string& json_text);

}  // namespace pigpaxos::sim
