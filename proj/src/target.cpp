#include "iit/target.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "iit/errors.hpp"

namespace iit {

std::size_t StateHash::operator()(const State& x) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::int32_t v : x) {
        h ^= static_cast<std::uint32_t>(v);
        h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
}

double DiscreteTarget::neighbor_log_pi(const State& x, double, std::size_t i) const { return log_pi(neighbor(x, i)); }

void DiscreteTarget::neighbor_log_pis(const State& x, double log_pi_x, std::span<double> out) const {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = neighbor_log_pi(x, log_pi_x, i);
}

std::size_t DiscreteTarget::neighbor_degree(const State& x, std::size_t i) const {
    return neighbor_count(neighbor(x, i));
}

std::size_t DiscreteTarget::reverse_index(const State& x, std::size_t i) const {
    const State y = neighbor(x, i);
    const std::size_t n = neighbor_count(y);
    for (std::size_t j = 0; j < n; ++j)
        if (neighbor(y, j) == x) return j;
    throw ContractViolation("neighborhood relation is not symmetric");
}

BinaryTarget::BinaryTarget(std::size_t dimension) : dimension_(dimension) {
    if (dimension == 0) throw ConfigError("binary target needs p >= 1");
}

State BinaryTarget::neighbor(const State& x, std::size_t i) const {
    State y = x;
    y.at(i) ^= 1;
    return y;
}

void BinaryTarget::check_state(const State& x) const {
    if (x.size() != dimension_)
        throw std::invalid_argument("state has length " + std::to_string(x.size()) + ", expected " +
                                    std::to_string(dimension_));
    for (std::int32_t v : x)
        if (v != 0 && v != 1) throw std::invalid_argument("binary state entries must be 0 or 1");
}

EnumeratedTarget::EnumeratedTarget(std::vector<double> log_pi, std::vector<std::vector<std::size_t>> adjacency)
    : log_pi_(std::move(log_pi)), adjacency_(std::move(adjacency)) {
    const std::size_t n = log_pi_.size();
    if (n == 0 || adjacency_.size() != n) throw ConfigError("enumerated target needs one adjacency list per state");
    for (std::size_t s = 0; s < n; ++s) {
        if (!std::isfinite(log_pi_[s])) throw ConfigError("enumerated target log pi must be finite");
        if (adjacency_[s].empty()) throw ConfigError("every state needs at least one neighbor");
        if (adjacency_[s].size() != adjacency_[0].size()) constant_degree_ = false;
        for (std::size_t t : adjacency_[s]) {
            if (t >= n || t == s) throw ConfigError("adjacency lists must reference other valid states");
            bool back = false;
            for (std::size_t u : adjacency_[t]) back = back || u == s;
            if (!back) throw ConfigError("adjacency must be symmetric");
        }
    }
}

EnumeratedTarget EnumeratedTarget::complete(std::vector<double> log_pi) {
    const std::size_t n = log_pi.size();
    std::vector<std::vector<std::size_t>> adjacency(n);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t t = 0; t < n; ++t)
            if (t != s) adjacency[s].push_back(t);
    return EnumeratedTarget(std::move(log_pi), std::move(adjacency));
}

std::size_t EnumeratedTarget::index_of(const State& x) const {
    if (x.size() != 1 || x[0] < 0 || static_cast<std::size_t>(x[0]) >= log_pi_.size())
        throw std::invalid_argument("state is not an index of this enumerated target");
    return static_cast<std::size_t>(x[0]);
}

double EnumeratedTarget::log_pi(const State& x) const { return log_pi_[index_of(x)]; }

std::size_t EnumeratedTarget::neighbor_count(const State& x) const { return adjacency_[index_of(x)].size(); }

State EnumeratedTarget::neighbor(const State& x, std::size_t i) const {
    return State{static_cast<std::int32_t>(adjacency_[index_of(x)].at(i))};
}

std::string EnumeratedTarget::describe() const { return "enumerated(" + std::to_string(log_pi_.size()) + ")"; }

void informed_log_weights(const DiscreteTarget& target, const BalancingFunction& h, const State& x, double log_pi_x,
                          std::span<const double> neighbor_log_pi, std::span<double> out,
                          double inverse_temperature) {
    const std::size_t n = neighbor_log_pi.size();
    const double log_nx = std::log(static_cast<double>(n));
    const bool same_degree = target.constant_degree();
    for (std::size_t i = 0; i < n; ++i) {
        double log_r = inverse_temperature * (neighbor_log_pi[i] - log_pi_x);
        if (!same_degree) log_r += log_nx - std::log(static_cast<double>(target.neighbor_degree(x, i)));
        out[i] = -log_nx + h.log_apply(log_r);
    }
}

double log_eta(const DiscreteTarget& target, const BalancingFunction& h, const State& x, const State& y) {
    const std::size_t n = target.neighbor_count(x);
    for (std::size_t i = 0; i < n; ++i) {
        if (target.neighbor(x, i) != y) continue;
        const double log_nx = std::log(static_cast<double>(n));
        const double log_ny = std::log(static_cast<double>(target.neighbor_count(y)));
        return -log_nx + h.log_apply(target.log_pi(y) - target.log_pi(x) + log_nx - log_ny);
    }
    throw std::invalid_argument("log_eta: y is not a neighbor of x");
}

double compute_log_Z(const DiscreteTarget& target, const BalancingFunction& h, const State& x, CallLedger& ledger) {
    const std::size_t n = target.neighbor_count(x);
    const double lp = target.log_pi(x);
    std::vector<double> neighbor_lp(n), log_eta_values(n);
    target.neighbor_log_pis(x, lp, neighbor_lp);
    ledger.charge(n);
    informed_log_weights(target, h, x, lp, neighbor_lp, log_eta_values);
    return log_sum_exp(log_eta_values);
}

double compute_log_Z(const DiscreteTarget& target, const BalancingFunction& h, const State& x) {
    CallLedger ledger;
    return compute_log_Z(target, h, x, ledger);
}

}  // namespace iit
