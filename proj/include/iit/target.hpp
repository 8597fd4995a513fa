#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "iit/balancing.hpp"
#include "iit/log_math.hpp"
#include "iit/random.hpp"

namespace iit {

// Opaque discrete state: a 0/1 vector for binary targets, a single integer otherwise.
using State = std::vector<std::int32_t>;

struct StateHash {
    std::size_t operator()(const State& x) const noexcept;
};

// Counts posterior evaluations: 1 per log_pi call, |N_x| per full-neighborhood sweep.
class CallLedger {
public:
    void charge(std::uint64_t n) { calls_ += n; }
    std::uint64_t calls() const { return calls_; }

private:
    std::uint64_t calls_ = 0;
};

// Un-normalized discrete target with a uniform-on-neighborhood reference proposal.
class DiscreteTarget {
public:
    virtual ~DiscreteTarget() = default;

    virtual double log_pi(const State& x) const = 0;
    virtual std::size_t neighbor_count(const State& x) const = 0;
    virtual State neighbor(const State& x, std::size_t i) const = 0;

    // True when every state has the same number of neighbors.
    virtual bool constant_degree() const { return false; }
    // log pi of the i-th neighbor, given log pi(x).
    virtual double neighbor_log_pi(const State& x, double log_pi_x, std::size_t i) const;
    // log pi of every neighbor; out.size() == neighbor_count(x).
    virtual void neighbor_log_pis(const State& x, double log_pi_x, std::span<double> out) const;
    // |N_y| for y = neighbor(x, i).
    virtual std::size_t neighbor_degree(const State& x, std::size_t i) const;
    // Position of x in the neighbor list of neighbor(x, i).
    virtual std::size_t reverse_index(const State& x, std::size_t i) const;

    virtual std::string describe() const = 0;
};

// Target whose density is only available through a nonnegative unbiased estimator.
class PseudoMarginalTarget : public DiscreteTarget {
public:
    virtual LogWeight log_pi_estimate(const State& x, Rng& rng) const = 0;
};

// Binary vectors of length p with Hamming-1 neighborhoods.
class BinaryTarget : public DiscreteTarget {
public:
    explicit BinaryTarget(std::size_t dimension);

    std::size_t dimension() const { return dimension_; }
    std::size_t neighbor_count(const State&) const override { return dimension_; }
    State neighbor(const State& x, std::size_t i) const override;
    bool constant_degree() const override { return true; }
    std::size_t neighbor_degree(const State&, std::size_t) const override { return dimension_; }
    std::size_t reverse_index(const State&, std::size_t i) const override { return i; }

    // Throws std::invalid_argument unless x is a 0/1 vector of the right length.
    void check_state(const State& x) const;

private:
    std::size_t dimension_;
};

// Small explicit target: states 0..n-1 (encoded as {i}) with given log pi and adjacency.
class EnumeratedTarget : public DiscreteTarget {
public:
    EnumeratedTarget(std::vector<double> log_pi, std::vector<std::vector<std::size_t>> adjacency);

    // Complete graph on n states.
    static EnumeratedTarget complete(std::vector<double> log_pi);

    std::size_t size() const { return log_pi_.size(); }
    double log_pi(const State& x) const override;
    std::size_t neighbor_count(const State& x) const override;
    State neighbor(const State& x, std::size_t i) const override;
    bool constant_degree() const override { return constant_degree_; }
    std::string describe() const override;

private:
    std::size_t index_of(const State& x) const;

    std::vector<double> log_pi_;
    std::vector<std::vector<std::size_t>> adjacency_;
    bool constant_degree_ = true;
};

// log eta_h(y|x) for each neighbor at inverse temperature `inverse_temperature`:
// -log|N_x| + log h(a (log pi(y) - log pi(x)) + log|N_x| - log|N_y|).
void informed_log_weights(const DiscreteTarget& target, const BalancingFunction& h, const State& x, double log_pi_x,
                          std::span<const double> neighbor_log_pi, std::span<double> out,
                          double inverse_temperature = 1.0);

double log_eta(const DiscreteTarget& target, const BalancingFunction& h, const State& x, const State& y);

double compute_log_Z(const DiscreteTarget& target, const BalancingFunction& h, const State& x, CallLedger& ledger);
double compute_log_Z(const DiscreteTarget& target, const BalancingFunction& h, const State& x);

}  // namespace iit
