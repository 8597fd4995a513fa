#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iit/target.hpp"

namespace iit {

enum class ToyExample { Toy1, Toy2, Toy3, Toy4 };

std::string to_string(ToyExample example);
ToyExample parse_toy_example(const std::string& text);

struct ToySpec {
    ToyExample example = ToyExample::Toy1;
    int p = 10;
    int p1 = 1;
    double theta = 1.0;

    void validate() const;
};

// Exact law of a summary statistic F: probability of each integer key.
class PushForward {
public:
    PushForward() = default;
    PushForward(std::vector<std::int64_t> keys, std::vector<double> probabilities);

    std::size_t size() const { return keys_.size(); }
    const std::vector<std::int64_t>& keys() const { return keys_; }
    const std::vector<double>& probabilities() const { return probabilities_; }
    // Dense bucket index of a key, or -1 if the key has zero mass.
    std::int64_t bucket_of(std::int64_t key) const;
    double probability_of(std::int64_t key) const;

private:
    std::vector<std::int64_t> keys_;
    std::vector<double> probabilities_;
    std::vector<std::int32_t> lookup_;
};

// Closed-form toy targets on {0,1}^p.
//   Toy1: pi ∝ exp(-theta ||x - x*||_1), x* = first p1 coordinates on.
//   Toy2: pi ∝ exp(-theta l(x)), l = ||x||_1 - 1 if x_1 = 1, else 2p - ||x||_1.
//   Toy3/Toy4: pi ∝ exp(-theta d(x, m1)) + exp(-theta d(x, m2)) with two modes of size p1.
class ToyTarget : public BinaryTarget {
public:
    explicit ToyTarget(ToySpec spec);

    const ToySpec& spec() const { return spec_; }
    // Mode layout: one entry for Toy1/Toy2, two for Toy3/Toy4.
    const std::vector<State>& modes() const { return modes_; }

    double log_pi(const State& x) const override;
    double neighbor_log_pi(const State& x, double log_pi_x, std::size_t i) const override;
    void neighbor_log_pis(const State& x, double log_pi_x, std::span<double> out) const override;
    std::string describe() const override;

    // Integer key of the summary statistic: Toy1 distance to the mode; Toy2 the two-branch
    // statistic; Toy3/Toy4 the distance pair encoded as d1 * (p + 1) + d2.
    std::int64_t summary_key(const State& x) const;
    PushForward exact_pushforward() const;

private:
    int distance(const State& x, const State& mode) const;
    double two_mode_log(int d1, int d2) const;

    ToySpec spec_;
    std::vector<State> modes_;
};

double toy_log_pi(const ToySpec& spec, const State& x);
PushForward toy_pushforward_exact(const ToySpec& spec);

// Toy2 seen through a noisy estimate of theta: log pi_hat = -theta_hat l - l^2 sigma^2 / 2,
// theta_hat ~ N(theta, sigma^2), which is unbiased for exp(-theta l).
class NoisyToy2Target : public PseudoMarginalTarget {
public:
    NoisyToy2Target(int p, double theta, double sigma);

    const ToyTarget& exact() const { return exact_; }
    double sigma() const { return sigma_; }

    double log_pi(const State& x) const override { return exact_.log_pi(x); }
    std::size_t neighbor_count(const State& x) const override { return exact_.neighbor_count(x); }
    State neighbor(const State& x, std::size_t i) const override { return exact_.neighbor(x, i); }
    bool constant_degree() const override { return true; }
    std::size_t neighbor_degree(const State& x, std::size_t i) const override { return exact_.neighbor_degree(x, i); }
    std::size_t reverse_index(const State&, std::size_t i) const override { return i; }
    LogWeight log_pi_estimate(const State& x, Rng& rng) const override;
    std::string describe() const override;

private:
    ToyTarget exact_;
    double sigma_;
};

}  // namespace iit
