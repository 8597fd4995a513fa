#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "iit/random.hpp"

namespace iit {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Natural-log importance weight; zero mass is an explicit flag rather than -inf arithmetic.
class LogWeight {
public:
    constexpr LogWeight() = default;
    explicit LogWeight(double log_value);

    static constexpr LogWeight zero() {
        LogWeight w;
        w.zero_ = true;
        return w;
    }

    constexpr bool is_zero() const { return zero_; }
    // Throws DegenerateError for the zero token.
    double log() const;
    // log value, or -inf for the zero token.
    constexpr double log_or_neg_inf() const { return zero_ ? kNegInf : value_; }

    friend constexpr bool operator==(const LogWeight&, const LogWeight&) = default;

private:
    double value_ = 0.0;
    bool zero_ = false;
};

double log_sum_exp(std::span<const double> values);

// Index i with probability exp(lw_i - logsumexp(lw)); one uniform draw, inverse CDF.
std::size_t sample_categorical_log(std::span<const double> log_weights, Rng& rng);

}  // namespace iit
