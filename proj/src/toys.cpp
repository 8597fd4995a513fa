#include "iit/toys.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "iit/errors.hpp"

namespace iit {

namespace {

double log_binomial(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

void add_log_mass(std::map<std::int64_t, double>& buckets, std::int64_t key, double log_mass) {
    auto [it, inserted] = buckets.emplace(key, log_mass);
    if (!inserted) {
        const double hi = std::max(it->second, log_mass);
        it->second = hi + std::log(std::exp(it->second - hi) + std::exp(log_mass - hi));
    }
}

PushForward normalize(const std::map<std::int64_t, double>& buckets) {
    std::vector<std::int64_t> keys;
    std::vector<double> logs;
    for (const auto& [k, v] : buckets) {
        keys.push_back(k);
        logs.push_back(v);
    }
    const double total = log_sum_exp(logs);
    std::vector<double> probs(logs.size());
    for (std::size_t i = 0; i < logs.size(); ++i) probs[i] = std::exp(logs[i] - total);
    return PushForward(std::move(keys), std::move(probs));
}

}  // namespace

std::string to_string(ToyExample example) {
    switch (example) {
        case ToyExample::Toy1: return "toy1";
        case ToyExample::Toy2: return "toy2";
        case ToyExample::Toy3: return "toy3";
        case ToyExample::Toy4: return "toy4";
    }
    return "?";
}

ToyExample parse_toy_example(const std::string& text) {
    if (text == "toy1") return ToyExample::Toy1;
    if (text == "toy2") return ToyExample::Toy2;
    if (text == "toy3") return ToyExample::Toy3;
    if (text == "toy4") return ToyExample::Toy4;
    throw ConfigError("unknown toy example '" + text + "' (expected toy1..toy4)");
}

void ToySpec::validate() const {
    if (p < 1) throw ConfigError("toy target needs p >= 1");
    if (!(theta > 0.0) || !std::isfinite(theta)) throw ConfigError("toy target needs a finite theta > 0");
    switch (example) {
        case ToyExample::Toy1:
            if (p1 < 1 || p1 > p) throw ConfigError("toy1 needs 1 <= p1 <= p");
            break;
        case ToyExample::Toy2:
            break;
        case ToyExample::Toy3:
            if (p1 < 1 || p < std::max(2, p1 + 1)) throw ConfigError("toy3 needs p1 >= 1 and p >= max(2, p1 + 1)");
            break;
        case ToyExample::Toy4:
            if (p1 < 3 || p < p1 + 2) throw ConfigError("toy4 needs p1 >= 3 and p >= p1 + 2");
            break;
    }
}

PushForward::PushForward(std::vector<std::int64_t> keys, std::vector<double> probabilities)
    : keys_(std::move(keys)), probabilities_(std::move(probabilities)) {
    if (keys_.size() != probabilities_.size()) throw std::invalid_argument("push-forward keys/probabilities mismatch");
    std::int64_t max_key = -1;
    for (std::int64_t k : keys_) {
        if (k < 0) throw std::invalid_argument("push-forward keys must be nonnegative");
        max_key = std::max(max_key, k);
    }
    lookup_.assign(static_cast<std::size_t>(max_key + 1), -1);
    for (std::size_t i = 0; i < keys_.size(); ++i) lookup_[static_cast<std::size_t>(keys_[i])] = static_cast<std::int32_t>(i);
}

std::int64_t PushForward::bucket_of(std::int64_t key) const {
    if (key < 0 || static_cast<std::size_t>(key) >= lookup_.size()) return -1;
    return lookup_[static_cast<std::size_t>(key)];
}

double PushForward::probability_of(std::int64_t key) const {
    const std::int64_t b = bucket_of(key);
    return b < 0 ? 0.0 : probabilities_[static_cast<std::size_t>(b)];
}

ToyTarget::ToyTarget(ToySpec spec) : BinaryTarget(static_cast<std::size_t>(std::max(spec.p, 1))), spec_(spec) {
    spec_.validate();
    const auto p = static_cast<std::size_t>(spec_.p);
    const auto p1 = static_cast<std::size_t>(spec_.p1);
    switch (spec_.example) {
        case ToyExample::Toy1: {
            State mode(p, 0);
            std::fill(mode.begin(), mode.begin() + static_cast<std::ptrdiff_t>(p1), 1);
            modes_.push_back(mode);
            break;
        }
        case ToyExample::Toy2: {
            State mode(p, 0);
            mode[0] = 1;
            modes_.push_back(mode);
            break;
        }
        case ToyExample::Toy3: {
            State first(p, 0), second(p, 0);
            first[0] = 1;
            second[1] = 1;
            for (std::size_t i = 2; i <= p1; ++i) first[i] = second[i] = 1;
            modes_ = {first, second};
            break;
        }
        case ToyExample::Toy4: {
            State first(p, 0), second(p, 0);
            first[0] = first[1] = 1;
            for (std::size_t i = 4; i < p1 + 2; ++i) first[i] = 1;
            for (std::size_t i = 2; i < p1 + 2; ++i) second[i] = 1;
            modes_ = {first, second};
            break;
        }
    }
}

int ToyTarget::distance(const State& x, const State& mode) const {
    int d = 0;
    for (std::size_t i = 0; i < x.size(); ++i) d += x[i] != mode[i];
    return d;
}

double ToyTarget::two_mode_log(int d1, int d2) const {
    const double lo = std::min(d1, d2);
    return -spec_.theta * lo + std::log1p(std::exp(-spec_.theta * std::abs(d1 - d2)));
}

double ToyTarget::log_pi(const State& x) const {
    check_state(x);
    switch (spec_.example) {
        case ToyExample::Toy1:
            return -spec_.theta * distance(x, modes_[0]);
        case ToyExample::Toy2: {
            int ones = 0;
            for (std::int32_t v : x) ones += v;
            const int loss = x[0] == 1 ? ones - 1 : 2 * spec_.p - ones;
            return -spec_.theta * loss;
        }
        case ToyExample::Toy3:
        case ToyExample::Toy4:
            return two_mode_log(distance(x, modes_[0]), distance(x, modes_[1]));
    }
    return 0.0;
}

double ToyTarget::neighbor_log_pi(const State& x, double log_pi_x, std::size_t i) const {
    if (spec_.example == ToyExample::Toy1) {
        const double step = x.at(i) == modes_[0][i] ? -spec_.theta : spec_.theta;
        return log_pi_x + step;
    }
    if (spec_.example == ToyExample::Toy2 && i != 0) {
        // Away from the first coordinate the loss moves by one in a direction set by x_1.
        const bool adds = x.at(i) == 0;
        const bool grows = (x[0] == 1) == adds;
        return log_pi_x + (grows ? -spec_.theta : spec_.theta);
    }
    return log_pi(neighbor(x, i));
}

void ToyTarget::neighbor_log_pis(const State& x, double log_pi_x, std::span<double> out) const {
    check_state(x);
    if (spec_.example == ToyExample::Toy3 || spec_.example == ToyExample::Toy4) {
        const int d1 = distance(x, modes_[0]);
        const int d2 = distance(x, modes_[1]);
        for (std::size_t i = 0; i < out.size(); ++i) {
            const int e1 = d1 + (x[i] == modes_[0][i] ? 1 : -1);
            const int e2 = d2 + (x[i] == modes_[1][i] ? 1 : -1);
            out[i] = two_mode_log(e1, e2);
        }
        return;
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = neighbor_log_pi(x, log_pi_x, i);
}

std::string ToyTarget::describe() const {
    return to_string(spec_.example) + "(p=" + std::to_string(spec_.p) + ",p1=" + std::to_string(spec_.p1) +
           ",theta=" + std::to_string(spec_.theta) + ")";
}

std::int64_t ToyTarget::summary_key(const State& x) const {
    check_state(x);
    switch (spec_.example) {
        case ToyExample::Toy1:
            return distance(x, modes_[0]);
        case ToyExample::Toy2: {
            if (x[0] == 0) return spec_.p;
            int ones = 0;
            for (std::int32_t v : x) ones += v;
            return ones - 1;
        }
        case ToyExample::Toy3:
        case ToyExample::Toy4:
            return static_cast<std::int64_t>(distance(x, modes_[0])) * (spec_.p + 1) + distance(x, modes_[1]);
    }
    return 0;
}

PushForward ToyTarget::exact_pushforward() const {
    std::map<std::int64_t, double> buckets;
    const int p = spec_.p;
    const double theta = spec_.theta;
    switch (spec_.example) {
        case ToyExample::Toy1:
            for (int k = 0; k <= p; ++k) add_log_mass(buckets, k, log_binomial(p, k) - theta * k);
            break;
        case ToyExample::Toy2: {
            for (int k = 0; k <= p - 1; ++k) add_log_mass(buckets, k, log_binomial(p - 1, k) - theta * k);
            // x_1 = 0 branch: sum_k C(p-1, k) exp(-theta (2p - k)) = exp(-2p theta) (1 + e^theta)^(p-1)
            const double log_one_plus = theta + std::log1p(std::exp(-theta));
            add_log_mass(buckets, p, -2.0 * theta * p + (p - 1) * log_one_plus);
            break;
        }
        case ToyExample::Toy3:
        case ToyExample::Toy4: {
            // Coordinates where the modes agree shift both distances equally; enumerate the rest.
            std::vector<std::size_t> differ;
            for (std::size_t i = 0; i < modes_[0].size(); ++i)
                if (modes_[0][i] != modes_[1][i]) differ.push_back(i);
            const int shared = p - static_cast<int>(differ.size());
            const std::size_t patterns = std::size_t{1} << differ.size();
            for (std::size_t mask = 0; mask < patterns; ++mask) {
                int a1 = 0, a2 = 0;
                for (std::size_t b = 0; b < differ.size(); ++b) {
                    const std::int32_t bit = (mask >> b) & 1U;
                    a1 += bit != modes_[0][differ[b]];
                    a2 += bit != modes_[1][differ[b]];
                }
                for (int r = 0; r <= shared; ++r) {
                    const std::int64_t key = static_cast<std::int64_t>(a1 + r) * (p + 1) + (a2 + r);
                    add_log_mass(buckets, key, log_binomial(shared, r) + two_mode_log(a1 + r, a2 + r));
                }
            }
            break;
        }
    }
    return normalize(buckets);
}

double toy_log_pi(const ToySpec& spec, const State& x) { return ToyTarget(spec).log_pi(x); }

PushForward toy_pushforward_exact(const ToySpec& spec) { return ToyTarget(spec).exact_pushforward(); }

NoisyToy2Target::NoisyToy2Target(int p, double theta, double sigma)
    : exact_(ToySpec{ToyExample::Toy2, p, 1, theta}), sigma_(sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("noisy toy2 needs a finite sigma >= 0");
}

LogWeight NoisyToy2Target::log_pi_estimate(const State& x, Rng& rng) const {
    const double loss = std::round(-exact_.log_pi(x) / exact_.spec().theta);
    std::normal_distribution<double> noise(exact_.spec().theta, sigma_);
    const double theta_hat = sigma_ > 0.0 ? noise(rng) : exact_.spec().theta;
    return LogWeight(-theta_hat * loss - 0.5 * loss * loss * sigma_ * sigma_);
}

std::string NoisyToy2Target::describe() const {
    return "noisy-" + exact_.describe() + "[sigma=" + std::to_string(sigma_) + "]";
}

}  // namespace iit
