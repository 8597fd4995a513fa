#pragma once

#include <string>

#include "iit/target.hpp"

namespace iit {

struct GeomABCSpec {
    double a = 0.5;
    double b = 0.4;
    int K = 100;

    void validate() const;
};

// Geometric target on {1, 2, ...} with success probability 1 - ab, seen through the ABC estimator
// pi_hat(x) = (k / K) (1 - a) a^{x-1} with k ~ Binomial(K, b^x).
// Neighborhoods are {x - 1, x + 1} for x >= 2 and {2} for x = 1.
class GeomABCTarget : public PseudoMarginalTarget {
public:
    explicit GeomABCTarget(GeomABCSpec spec);

    const GeomABCSpec& spec() const { return spec_; }

    // Exact log pi(x) = log(1 - a) + (x - 1) log a + x log b.
    double log_pi(const State& x) const override;
    std::size_t neighbor_count(const State& x) const override;
    State neighbor(const State& x, std::size_t i) const override;
    std::size_t reverse_index(const State& x, std::size_t i) const override;
    LogWeight log_pi_estimate(const State& x, Rng& rng) const override;
    std::string describe() const override;

    // Probability that at least one neighbor estimate is nonzero.
    double nonzero_neighbor_probability(int x) const;
    // Posterior mean 1 / (1 - ab).
    double posterior_mean() const { return 1.0 / (1.0 - spec_.a * spec_.b); }

private:
    static int value(const State& x);

    GeomABCSpec spec_;
};

LogWeight abc_log_pi_estimate(const GeomABCSpec& spec, int x, Rng& rng);

}  // namespace iit
