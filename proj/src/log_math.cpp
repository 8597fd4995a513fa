#include "iit/log_math.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "iit/errors.hpp"

namespace iit {

LogWeight::LogWeight(double log_value) : value_(log_value) {
    if (!std::isfinite(log_value)) throw std::invalid_argument("log weight must be finite; use LogWeight::zero()");
}

double LogWeight::log() const {
    if (zero_) throw DegenerateError("log of a zero weight");
    return value_;
}

double log_sum_exp(std::span<const double> values) {
    double peak = kNegInf;
    for (double v : values) peak = std::max(peak, v);
    if (peak == kNegInf) return kNegInf;
    double total = 0.0;
    for (double v : values) total += std::exp(v - peak);
    return peak + std::log(total);
}

std::size_t sample_categorical_log(std::span<const double> log_weights, Rng& rng) {
    double peak = kNegInf;
    for (double v : log_weights) {
        if (std::isnan(v)) throw std::invalid_argument("NaN log weight in categorical draw");
        peak = std::max(peak, v);
    }
    if (peak == kNegInf) throw DegenerateError("categorical draw with no positive mass");
    double total = 0.0;
    for (double v : log_weights) total += std::exp(v - peak);
    const double target = uniform01(rng) * total;
    double running = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < log_weights.size(); ++i) {
        const double mass = std::exp(log_weights[i] - peak);
        if (mass <= 0.0) continue;
        running += mass;
        last_positive = i;
        if (target < running) return i;
    }
    return last_positive;
}

}  // namespace iit
