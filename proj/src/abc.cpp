#include "iit/abc.hpp"

#include <cmath>
#include <stdexcept>

#include "iit/errors.hpp"

namespace iit {

void GeomABCSpec::validate() const {
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("ABC target needs 0 < a < 1");
    if (!(b > 0.0 && b < 1.0)) throw ConfigError("ABC target needs 0 < b < 1");
    if (K < 1) throw ConfigError("ABC target needs K >= 1");
}

GeomABCTarget::GeomABCTarget(GeomABCSpec spec) : spec_(spec) { spec_.validate(); }

int GeomABCTarget::value(const State& x) {
    if (x.size() != 1 || x[0] < 1) throw std::invalid_argument("ABC state must be a single integer >= 1");
    return x[0];
}

double GeomABCTarget::log_pi(const State& x) const {
    const int v = value(x);
    return std::log1p(-spec_.a) + (v - 1) * std::log(spec_.a) + v * std::log(spec_.b);
}

std::size_t GeomABCTarget::neighbor_count(const State& x) const { return value(x) == 1 ? 1 : 2; }

State GeomABCTarget::neighbor(const State& x, std::size_t i) const {
    const int v = value(x);
    if (v == 1) {
        if (i != 0) throw std::out_of_range("ABC neighbor index");
        return State{2};
    }
    if (i > 1) throw std::out_of_range("ABC neighbor index");
    return State{i == 0 ? v - 1 : v + 1};
}

std::size_t GeomABCTarget::reverse_index(const State& x, std::size_t i) const {
    const int v = value(x);
    const int y = neighbor(x, i)[0];
    if (y == 1) return 0;
    return y < v ? 1 : 0;
}

LogWeight GeomABCTarget::log_pi_estimate(const State& x, Rng& rng) const {
    return abc_log_pi_estimate(spec_, value(x), rng);
}

std::string GeomABCTarget::describe() const {
    return "geom-abc(a=" + std::to_string(spec_.a) + ",b=" + std::to_string(spec_.b) + ",K=" +
           std::to_string(spec_.K) + ")";
}

double GeomABCTarget::nonzero_neighbor_probability(int x) const {
    const auto miss = [&](int y) { return std::pow(1.0 - std::pow(spec_.b, y), spec_.K); };
    if (x == 1) return 1.0 - miss(2);
    return 1.0 - miss(x - 1) * miss(x + 1);
}

LogWeight abc_log_pi_estimate(const GeomABCSpec& spec, int x, Rng& rng) {
    if (x < 1) throw std::invalid_argument("ABC state must be >= 1");
    std::binomial_distribution<int> hits(spec.K, std::pow(spec.b, x));
    const int k = hits(rng);
    if (k == 0) return LogWeight::zero();
    return LogWeight(std::log(static_cast<double>(k) / spec.K) + std::log1p(-spec.a) + (x - 1) * std::log(spec.a));
}

}  // namespace iit
