#include "iit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "iit/errors.hpp"

namespace iit {

EstimatorResult self_normalized_estimate(std::span<const LogWeight> log_weights, std::span<const double> values) {
    if (log_weights.size() != values.size()) throw std::invalid_argument("weights and values differ in length");
    double peak = kNegInf;
    for (const LogWeight& w : log_weights) peak = std::max(peak, w.log_or_neg_inf());
    if (peak == kNegInf) throw DegenerateError("no retained sample has positive weight");
    double sum_w = 0.0, sum_w2 = 0.0, sum_fw = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (log_weights[i].is_zero()) continue;
        const double w = std::exp(log_weights[i].log() - peak);
        sum_w += w;
        sum_w2 += w * w;
        sum_fw += w * values[i];
    }
    return {sum_fw / sum_w, sum_w * sum_w / sum_w2, values.size()};
}

EstimatorResult self_normalized_estimate(const WeightedSampleStream& stream, const std::function<double(const State&)>& f,
                                         double burn_in_fraction) {
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) throw std::invalid_argument("burn-in fraction must lie in [0, 1)");
    const auto start = static_cast<std::size_t>(std::floor(burn_in_fraction * static_cast<double>(stream.size())));
    std::vector<double> values;
    values.reserve(stream.size() - start);
    for (std::size_t i = start; i < stream.size(); ++i) values.push_back(f(stream.states()[i]));
    return self_normalized_estimate(std::span<const LogWeight>(stream.log_weights()).subspan(start), values);
}

WeightedHistogram::WeightedHistogram(PushForward exact) : exact_(std::move(exact)), mass_(exact_.size(), 0.0) {}

void WeightedHistogram::add(std::int64_t key, LogWeight log_weight) {
    ++count_;
    if (log_weight.is_zero()) return;
    const double lw = log_weight.log();
    // Keep every stored mass below e^30 relative to the reference scale.
    if (lw > scale_ + 30.0) {
        if (scale_ > kNegInf) {
            const double factor = std::exp(scale_ - lw);
            for (double& m : mass_) m *= factor;
            overflow_ *= factor;
            total_ *= factor;
        }
        scale_ = lw;
    }
    const double w = std::exp(lw - scale_);
    const std::int64_t bucket = exact_.bucket_of(key);
    if (bucket < 0)
        overflow_ += w;
    else
        mass_[static_cast<std::size_t>(bucket)] += w;
    total_ += w;
}

std::vector<double> WeightedHistogram::probabilities() const {
    std::vector<double> out(mass_.size(), 0.0);
    if (total_ <= 0.0) return out;
    for (std::size_t k = 0; k < mass_.size(); ++k) out[k] = mass_[k] / total_;
    return out;
}

double WeightedHistogram::overflow_probability() const { return total_ > 0.0 ? overflow_ / total_ : 0.0; }

double WeightedHistogram::tv_distance() const {
    if (total_ <= 0.0) return 2.0;
    double d = overflow_ / total_;
    const auto& exact = exact_.probabilities();
    for (std::size_t k = 0; k < mass_.size(); ++k) d += std::abs(exact[k] - mass_[k] / total_);
    return std::min(d, 2.0);
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("distributions differ in support size");
    double d = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) d += std::abs(p[k] - q[k]);
    return d;
}

double tv_pushforward(const WeightedSampleStream& stream, const ToyTarget& target, double burn_in_fraction) {
    WeightedHistogram hist(target.exact_pushforward());
    const auto start = static_cast<std::size_t>(std::floor(burn_in_fraction * static_cast<double>(stream.size())));
    for (std::size_t i = start; i < stream.size(); ++i)
        hist.add(target.summary_key(stream.states()[i]), stream.log_weights()[i]);
    if (!hist.has_mass()) throw DegenerateError("no retained sample has positive weight");
    return hist.tv_distance();
}

ThresholdResult calls_to_threshold(const DiscreteTarget& sampled, const ToyTarget& reference,
                                   const SamplerConfig& config, const State& x0, double threshold,
                                   std::uint64_t budget, std::uint64_t call_stride) {
    if (budget == 0) throw ConfigError("budget must be at least 1");
    if (call_stride == 0) throw ConfigError("evaluation stride must be at least 1");
    SamplerConfig run = config;
    run.max_calls = budget;
    run.T = std::numeric_limits<std::uint64_t>::max() - 1;
    WeightedHistogram hist(reference.exact_pushforward());
    ThresholdResult result;
    result.threshold = threshold;
    result.budget = budget;
    result.censored = true;
    result.calls_to_threshold = budget;
    std::uint64_t samples = 0;
    std::uint64_t next_check = call_stride;
    const RunStats stats = run_sampler(sampled, run, x0, [&](const SampleView& s) {
        hist.add(reference.summary_key(s.state), s.log_weight);
        ++samples;
        if (s.calls < next_check) return true;
        next_check = s.calls + call_stride;
        result.final_distance = hist.tv_distance();
        if (s.calls > budget) return false;
        if (result.final_distance <= threshold) {
            result.censored = false;
            result.calls_to_threshold = s.calls;
            return false;
        }
        return true;
    });
    if (result.censored) result.final_distance = hist.tv_distance();
    result.samples = samples;
    result.calls_spent = stats.calls;
    return result;
}

ThresholdResult calls_to_threshold(const ToyTarget& target, const SamplerConfig& config, const State& x0,
                                   double threshold, std::uint64_t budget, std::uint64_t call_stride) {
    return calls_to_threshold(target, target, config, x0, threshold, budget, call_stride);
}

Quartiles quartiles(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("quartiles of an empty sample");
    std::sort(values.begin(), values.end());
    const auto at = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    return {at(0.25), at(0.5), at(0.75)};
}

ThresholdSummary summarize(std::span<const ThresholdResult> results) {
    ThresholdSummary summary;
    summary.replicates = results.size();
    std::vector<double> calls;
    for (const auto& r : results) {
        calls.push_back(static_cast<double>(r.calls_to_threshold));
        if (r.censored) ++summary.censored;
    }
    if (!calls.empty()) summary.calls = quartiles(std::move(calls));
    return summary;
}

double mean(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("mean of an empty sample");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double standard_deviation(std::span<const double> values) {
    if (values.size() < 2) throw std::invalid_argument("standard deviation needs at least two values");
    const double mu = mean(values);
    double s = 0.0;
    for (double v : values) s += (v - mu) * (v - mu);
    return std::sqrt(s / static_cast<double>(values.size() - 1));
}

}  // namespace iit
