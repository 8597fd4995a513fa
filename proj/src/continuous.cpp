#include "iit/continuous.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "iit/errors.hpp"

namespace iit {

double GaussianSpec::default_sigma(int p) { return std::sqrt(2.7 / std::pow(static_cast<double>(p), 0.75)); }

void GaussianSpec::validate() const {
    if (p < 1) throw ConfigError("Gaussian target needs p >= 1");
    if (sigma < 0.0 || !std::isfinite(sigma)) throw ConfigError("Gaussian proposal scale must be finite and >= 0");
}

GaussianTarget::GaussianTarget(GaussianSpec spec) : spec_(spec) { spec_.validate(); }

double GaussianTarget::log_pi(const Point& x) const { return gaussian_log_pdf(spec_, x); }

std::string GaussianTarget::describe() const { return "gaussian(p=" + std::to_string(spec_.p) + ")"; }

GaussianRandomWalk::GaussianRandomWalk(double sigma) : sigma_(sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("random-walk scale must be positive");
}

Point GaussianRandomWalk::sample(const Point& from, Rng& rng) const {
    std::normal_distribution<double> step(0.0, sigma_);
    Point to(from.size());
    for (std::size_t i = 0; i < from.size(); ++i) to[i] = from[i] + step(rng);
    return to;
}

double GaussianRandomWalk::log_density(const Point& to, const Point& from) const {
    if (to.size() != from.size()) throw std::invalid_argument("proposal density: dimension mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < to.size(); ++i) sq += (to[i] - from[i]) * (to[i] - from[i]);
    const double d = static_cast<double>(to.size());
    return -0.5 * sq / (sigma_ * sigma_) - d * std::log(sigma_) - 0.5 * d * std::log(2.0 * std::numbers::pi);
}

double gaussian_log_pdf(const GaussianSpec& spec, const Point& x) {
    if (x.size() != static_cast<std::size_t>(spec.p))
        throw std::invalid_argument("Gaussian point has length " + std::to_string(x.size()) + ", expected " +
                                    std::to_string(spec.p));
    double sq = 0.0;
    for (double v : x) sq += v * v;
    return -0.5 * sq;
}

}  // namespace iit
