#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "iit/log_math.hpp"
#include "iit/samplers.hpp"
#include "iit/toys.hpp"

namespace iit {

struct EstimatorResult {
    double value = 0.0;
    // (sum w)^2 / sum w^2
    double effective_samples = 0.0;
    std::size_t used = 0;
};

// Weighted mean sum f w / sum w over values[i] with log weights; zero tokens carry no mass.
EstimatorResult self_normalized_estimate(std::span<const LogWeight> log_weights, std::span<const double> values);

// Same over the stream suffix left after dropping floor(burn_in_fraction * size) samples.
EstimatorResult self_normalized_estimate(const WeightedSampleStream& stream, const std::function<double(const State&)>& f,
                                         double burn_in_fraction = 0.0);

// Importance-weighted empirical law over the buckets of an exact push-forward, accumulated in the
// log domain with a moving reference scale. Keys without exact mass share one overflow bucket.
class WeightedHistogram {
public:
    explicit WeightedHistogram(PushForward exact);

    void add(std::int64_t key, LogWeight log_weight);
    std::uint64_t count() const { return count_; }
    bool has_mass() const { return total_ > 0.0; }
    // Normalized empirical probability of each exact bucket (overflow excluded).
    std::vector<double> probabilities() const;
    double overflow_probability() const;
    // sum_k |pi_k - pi_hat_k|, in [0, 2]; 2 when nothing has positive weight yet.
    double tv_distance() const;

private:
    PushForward exact_;
    std::vector<double> mass_;
    double overflow_ = 0.0;
    double total_ = 0.0;
    double scale_ = kNegInf;
    std::uint64_t count_ = 0;
};

// sum_k |p_k - q_k| for two distributions on the same buckets.
double tv_distance(std::span<const double> p, std::span<const double> q);

// Push-forward TV distance between the toy target and the weighted stream.
double tv_pushforward(const WeightedSampleStream& stream, const ToyTarget& target, double burn_in_fraction = 0.0);

struct ThresholdResult {
    std::uint64_t calls_to_threshold = 0;  // equals budget when censored
    bool censored = false;
    double threshold = 0.0;
    std::uint64_t budget = 0;
    double final_distance = 2.0;
    std::uint64_t samples = 0;
    std::uint64_t calls_spent = 0;  // ledger total when the run stopped
};

// Runs the sampler from x0 and checks the push-forward TV distance whenever at least
// `call_stride` posterior calls have been spent since the previous check; reports the calls spent
// at the first check with distance <= threshold.
ThresholdResult calls_to_threshold(const ToyTarget& target, const SamplerConfig& config, const State& x0,
                                   double threshold, std::uint64_t budget, std::uint64_t call_stride = 100);
// Same for a pseudo-marginal target whose exact law is that of `reference`.
ThresholdResult calls_to_threshold(const DiscreteTarget& sampled, const ToyTarget& reference,
                                   const SamplerConfig& config, const State& x0, double threshold,
                                   std::uint64_t budget, std::uint64_t call_stride = 100);

struct Quartiles {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
};

// Linear-interpolation sample quartiles.
Quartiles quartiles(std::vector<double> values);

struct ThresholdSummary {
    std::size_t replicates = 0;
    std::size_t censored = 0;
    Quartiles calls;  // censored runs count at the budget
};

ThresholdSummary summarize(std::span<const ThresholdResult> results);

double mean(std::span<const double> values);
// Sample standard deviation (n - 1 denominator).
double standard_deviation(std::span<const double> values);

}  // namespace iit
