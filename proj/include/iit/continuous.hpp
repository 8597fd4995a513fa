#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "iit/random.hpp"

namespace iit {

using Point = std::vector<double>;

// Un-normalized target on a general (here Euclidean) space.
class GeneralTarget {
public:
    virtual ~GeneralTarget() = default;
    virtual std::size_t dimension() const = 0;
    virtual double log_pi(const Point& x) const = 0;
    virtual std::string describe() const = 0;
};

// Proposal kernel Q(x, .) that can be sampled and evaluated.
class ProposalKernel {
public:
    virtual ~ProposalKernel() = default;
    virtual Point sample(const Point& from, Rng& rng) const = 0;
    // log q(to | from)
    virtual double log_density(const Point& to, const Point& from) const = 0;
    virtual bool symmetric() const { return false; }
};

struct GaussianSpec {
    int p = 10;
    double sigma = 0.0;  // proposal scale; 0 selects sqrt(2.7 / p^0.75)

    static double default_sigma(int p);
    double proposal_sigma() const { return sigma > 0.0 ? sigma : default_sigma(p); }
    void validate() const;
};

// Standard normal N(0, I_p) with constants dropped: log pi(x) = -||x||^2 / 2.
class GaussianTarget : public GeneralTarget {
public:
    explicit GaussianTarget(GaussianSpec spec);

    const GaussianSpec& spec() const { return spec_; }
    std::size_t dimension() const override { return static_cast<std::size_t>(spec_.p); }
    double log_pi(const Point& x) const override;
    std::string describe() const override;

private:
    GaussianSpec spec_;
};

// Q(x, .) = N(x, sigma^2 I).
class GaussianRandomWalk : public ProposalKernel {
public:
    explicit GaussianRandomWalk(double sigma);

    double sigma() const { return sigma_; }
    Point sample(const Point& from, Rng& rng) const override;
    double log_density(const Point& to, const Point& from) const override;
    bool symmetric() const override { return true; }

private:
    double sigma_;
};

double gaussian_log_pdf(const GaussianSpec& spec, const Point& x);

}  // namespace iit
