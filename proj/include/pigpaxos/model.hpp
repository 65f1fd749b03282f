// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pigpaxos/types.hpp"

namespace pigpaxos::model {

// Exact rational on int64, always normalized with positive denominator.
struct Rational {
    int64_t num = 0;
    int64_t den = 1;

    Rational() = default;
    Rational(int64_t n) : num(n), den(1) {}
    Rational(int64_t n, int64_t d);

    Rational operator+(const Rational& o) const;
    Rational operator-(const Rational& o) const;
    Rational operator*(const Rational& o) const;
    Rational operator/(const Rational& o) const;
    friend bool operator==(const Rational&, const Rational&) = default;
    bool operator<(const Rational& o) const;

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    // Fixed-point rendering, round half away from zero.
    std::string to_decimal(int digits) const;
};

// Per-command messages handled by the leader: one client round trip plus one
// round trip per relay group.
Rational leader_load(int relay_groups);

// Rotation-amortized per-command messages handled by a follower.
Rational follower_load(int n, int relay_groups);

// leader_load / follower_load, exact.
Rational load_ratio(int n, int relay_groups);

// Cluster-wide sends per replication round (client reply included); constant
// in the group count.
int64_t total_messages(int n);

// Limit of follower_load(n, 1) as the cluster grows without bound.
Rational asymptotic_follower_limit();

struct PrcCheck {
    bool ok = false;
    int threshold_sum = 0;  // sum of per-group reply thresholds
    int required = 0;       // majority of the cluster
    std::string to_string() const;
};

// A configuration is usable only if the group thresholds can still assemble a
// majority: sum(max(n_i - prc, 0)) >= floor(n/2) + 1.
PrcCheck validate_prc(const RelayGroupConfig& groups, int prc, int n);

struct LoadModelRow {
    int relay_groups = 0;
    Rational leader;    // exact
    Rational follower;  // exact
    Rational ratio;     // exact leader/follower
    std::string label;  // "" or "Paxos"
};

std::vector<LoadModelRow> load_table(int n, const std::vector<int>& group_counts);

// Renders one table in the published layout. Follower loads print with two
// decimals (integers bare); the ratio column prints the published values,
// which divide the leader load by the two-decimal follower load.
std::string render_load_table(int n, const std::vector<int>& group_counts);

// The published 25-node and 5-node reference tables.
std::string reference_tables();

struct CrossValidation {
    bool ok = false;
    Rational expected_leader;
    double observed_leader = 0.0;
    Rational expected_follower;
    double observed_follower_mean = 0.0;
    double follower_rel_error = 0.0;
    std::string detail;
};

// Checks simulator counters against the closed forms: the leader count must
// match exactly, the follower mean within `follower_tolerance` relative.
CrossValidation cross_validate(int n, int relay_groups, int64_t commands,
                               int64_t leader_handled,
                               const std::vector<int64_t>& follower_handled,
                               double follower_tolerance = 0.02);

}  // namespace pigpaxos::model
