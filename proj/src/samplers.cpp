#include "iit/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "iit/abc.hpp"
#include "iit/errors.hpp"

namespace iit {

namespace {

// log eta for one neighbor with the same operation order as informed_log_weights.
double neighbor_log_eta(const DiscreteTarget& target, const BalancingFunction& h, const State& x, double log_pi_x,
                        std::size_t index, double log_pi_y, double log_nx, double inverse_temperature) {
    double log_r = inverse_temperature * (log_pi_y - log_pi_x);
    if (!target.constant_degree()) log_r += log_nx - std::log(static_cast<double>(target.neighbor_degree(x, index)));
    return -log_nx + h.log_apply(log_r);
}

double log_add(double a, double b) {
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    if (lo == kNegInf) return hi;
    return hi + std::log1p(std::exp(lo - hi));
}

std::int64_t fingerprint(const std::vector<std::size_t>& indices) {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t v : indices) {
        h ^= static_cast<std::uint64_t>(v);
        h *= 1099511628211ULL;
    }
    return static_cast<std::int64_t>(h >> 1);
}

class Emitter {
public:
    Emitter(const SampleSink& sink, RunStats& stats) : sink_(sink), stats_(stats) {}

    bool operator()(const State& x, LogWeight w, std::uint64_t calls, std::int64_t aux = -1) {
        ++stats_.samples;
        if (!sink_(SampleView{x, w, calls, aux})) {
            stats_.stopped_early = true;
            return false;
        }
        return true;
    }

private:
    const SampleSink& sink_;
    RunStats& stats_;
};

bool out_of_budget(const SamplerConfig& config, const CallLedger& ledger, RunStats& stats) {
    if (config.max_calls == 0 || ledger.calls() < config.max_calls) return false;
    stats.stopped_early = true;
    return true;
}

void require_bounded(const BalancingFunction& h) {
    if (!h.bounded())
        throw ConfigError("balancing function " + h.name() + " is unbounded; acceptance-rejection needs h <= 1");
}

RunStats run_tempered_iit(const DiscreteTarget& target, const BalancingFunction& h, double a,
                          const SamplerConfig& config, const State& x0, const SampleSink& sink) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("inverse temperature a must be positive");
    Rng rng(config.seed);
    CallLedger ledger;
    RunStats stats;
    Emitter emit(sink, stats);
    State x = x0;
    double lpx = target.log_pi(x);
    std::vector<double> nlp, leta;
    for (std::uint64_t k = 0;; ++k) {
        if (out_of_budget(config, ledger, stats)) break;
        const std::size_t n = target.neighbor_count(x);
        nlp.resize(n);
        leta.resize(n);
        target.neighbor_log_pis(x, lpx, nlp);
        ledger.charge(n);
        informed_log_weights(target, h, x, lpx, nlp, leta, a);
        const double log_z = log_sum_exp(leta);
        if (!emit(x, LogWeight((1.0 - a) * lpx - log_z), ledger.calls())) break;
        if (k == config.T) break;
        const std::size_t i = sample_categorical_log(leta, rng);
        lpx = nlp[i];
        x = target.neighbor(x, i);
    }
    stats.calls = ledger.calls();
    return stats;
}

template <class Runner>
WeightedSampleStream collect(Runner&& runner) {
    WeightedSampleStream stream;
    stream.stats = runner([&](const SampleView& s) {
        stream.push(s);
        return true;
    });
    return stream;
}

}  // namespace

std::string to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::NaiveIIT: return "naive-iit";
        case Algorithm::MHIIT: return "mh-iit";
        case Algorithm::RNIIT: return "rn-iit";
        case Algorithm::CTIIT: return "ct-iit";
        case Algorithm::VTIIT: return "vt-iit";
        case Algorithm::PIIT: return "p-iit";
        case Algorithm::PMH: return "p-mh";
        case Algorithm::MTIT: return "mt-it";
        case Algorithm::UninformedMH: return "mh";
    }
    return "?";
}

Algorithm parse_algorithm(const std::string& text) {
    for (Algorithm a : {Algorithm::NaiveIIT, Algorithm::MHIIT, Algorithm::RNIIT, Algorithm::CTIIT, Algorithm::VTIIT,
                        Algorithm::PIIT, Algorithm::PMH, Algorithm::MTIT, Algorithm::UninformedMH})
        if (text == to_string(a)) return a;
    throw ConfigError("unknown algorithm '" + text +
                      "' (expected naive-iit, mh-iit, rn-iit, ct-iit, vt-iit, p-iit, p-mh, mt-it or mh)");
}

double RhoMode::at(std::size_t neighbor_count) const {
    if (kind == Kind::Constant) return value;
    return std::min(1.0, value / static_cast<double>(neighbor_count));
}

std::string RhoMode::describe() const {
    std::ostringstream out;
    out << (kind == Kind::Constant ? "const:" : "a-over-n:") << value;
    return out.str();
}

std::string to_string(LadderMethod method) {
    switch (method) {
        case LadderMethod::M1: return "M1";
        case LadderMethod::M2: return "M2";
        case LadderMethod::M3: return "M3";
    }
    return "?";
}

LadderMethod parse_ladder_method(const std::string& text) {
    if (text == "M1" || text == "m1") return LadderMethod::M1;
    if (text == "M2" || text == "m2") return LadderMethod::M2;
    if (text == "M3" || text == "m3") return LadderMethod::M3;
    throw ConfigError("unknown ladder method '" + text + "' (expected M1, M2 or M3)");
}

double LadderConfig::inverse_temperature(int j) const { return 1.0 / (1.0 + j * delta); }

BalancingFunction LadderConfig::rung_balancing(int j) const {
    switch (method) {
        case LadderMethod::M1: return BalancingFunction::min_one();
        case LadderMethod::M2: return 2 * j < J ? BalancingFunction::sqrt() : BalancingFunction::min_one();
        case LadderMethod::M3: return j < J ? BalancingFunction::sqrt() : BalancingFunction::min_one();
    }
    return BalancingFunction::min_one();
}

void LadderConfig::validate() const {
    if (J < 0) throw ConfigError("ladder needs J >= 0");
    if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("ladder needs delta > 0");
    if (s0 < 0.0 || !(n0 > 0.0)) throw ConfigError("psi adaptation needs s0 >= 0 and n0 > 0");
    if (!initial_log_psi.empty() && initial_log_psi.size() != static_cast<std::size_t>(J + 1))
        throw ConfigError("initial_log_psi needs J + 1 entries");
}

void SamplerConfig::validate() const {
    switch (algorithm) {
        case Algorithm::MHIIT:
            require_bounded(h);
            if (rho.kind == RhoMode::Kind::Constant && !(rho.value >= 0.0 && rho.value <= 1.0))
                throw ConfigError("constant rho must lie in [0, 1]");
            if (rho.kind == RhoMode::Kind::AOverN && !(rho.value > 0.0)) throw ConfigError("A-over-N rho needs A > 0");
            break;
        case Algorithm::UninformedMH:
        case Algorithm::PMH:
            require_bounded(h);
            break;
        case Algorithm::RNIIT:
        case Algorithm::MTIT:
            if (m < 2) throw ConfigError("subset size m must be at least 2");
            break;
        case Algorithm::CTIIT:
            if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("inverse temperature a must be positive");
            break;
        case Algorithm::VTIIT:
            ladder.validate();
            break;
        case Algorithm::NaiveIIT:
        case Algorithm::PIIT:
            break;
    }
}

void WeightedSampleStream::push(const SampleView& sample) {
    states_.push_back(sample.state);
    log_weights_.push_back(sample.log_weight);
    calls_.push_back(sample.calls);
    aux_.push_back(sample.aux);
}

RunStats run_naive_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0,
                       const SampleSink& sink) {
    return run_tempered_iit(target, config.h, 1.0, config, x0, sink);
}

RunStats run_ct_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0,
                    const SampleSink& sink) {
    return run_tempered_iit(target, config.h, config.a, config, x0, sink);
}

WeightDraw estimate_weight_mh(const DiscreteTarget& target, const BalancingFunction& h, const State& x,
                              double log_pi_x, double rho, Rng& rng) {
    require_bounded(h);
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
    const std::size_t n = target.neighbor_count(x);
    const double log_nx = std::log(static_cast<double>(n));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    WeightDraw draw;
    std::uint64_t mh_steps = 0;
    for (;;) {
        const bool informed = rho >= 1.0 || (rho > 0.0 && uniform01(rng) <= rho);
        if (informed) {
            std::vector<double> nlp(n), leta(n);
            target.neighbor_log_pis(x, log_pi_x, nlp);
            draw.calls += n;
            informed_log_weights(target, h, x, log_pi_x, nlp, leta);
            const double log_z = log_sum_exp(leta);
            draw.log_w = mh_steps == 0 ? -log_z : log_add(std::log(static_cast<double>(mh_steps)), -log_z);
            draw.next_index = sample_categorical_log(leta, rng);
            draw.next_log_pi = nlp[draw.next_index];
            return draw;
        }
        ++mh_steps;
        const std::size_t i = pick(rng);
        const double lpy = target.neighbor_log_pi(x, log_pi_x, i);
        draw.calls += 1;
        const double log_alpha = neighbor_log_eta(target, h, x, log_pi_x, i, lpy, log_nx, 1.0) + log_nx;
        if (uniform01(rng) < std::exp(log_alpha)) {
            draw.log_w = std::log(static_cast<double>(mh_steps));
            draw.next_index = i;
            draw.next_log_pi = lpy;
            return draw;
        }
    }
}

WeightDraw estimate_weight_mh(const DiscreteTarget& target, const BalancingFunction& h, const State& x, double rho,
                              Rng& rng) {
    return estimate_weight_mh(target, h, x, target.log_pi(x), rho, rng);
}

RunStats run_mh_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0,
                    const SampleSink& sink) {
    require_bounded(config.h);
    Rng rng(config.seed);
    CallLedger ledger;
    RunStats stats;
    Emitter emit(sink, stats);
    State x = x0;
    double lpx = target.log_pi(x);
    for (std::uint64_t k = 0;; ++k) {
        if (out_of_budget(config, ledger, stats)) break;
        const double rho = config.rho.at(target.neighbor_count(x));
        const WeightDraw draw = estimate_weight_mh(target, config.h, x, lpx, rho, rng);
        ledger.charge(draw.calls);
        if (!emit(x, LogWeight(draw.log_w), ledger.calls())) break;
        if (k == config.T) break;
        lpx = draw.next_log_pi;
        x = target.neighbor(x, draw.next_index);
    }
    stats.calls = ledger.calls();
    return stats;
}

RunStats run_uninformed_mh(const DiscreteTarget& target, const SamplerConfig& config, const State& x0,
                           const SampleSink& sink) {
    SamplerConfig mh = config;
    mh.rho = RhoMode::constant(0.0);
    return run_mh_iit(target, mh, x0, sink);
}

RunStats run_rn_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0,
                    const SampleSink& sink) {
    const std::size_t m = config.m;
    if (m < 2) throw ConfigError("RN-IIT needs m >= 2");
    Rng rng(config.seed);
    CallLedger ledger;
    RunStats stats;
    Emitter emit(sink, stats);

    const auto draw_subset = [&](std::size_t n, std::size_t keep, bool has_keep) {
        if (m > n)
            throw ConfigError("RN-IIT subset size m = " + std::to_string(m) + " exceeds a neighborhood of size " +
                              std::to_string(n));
        std::vector<std::size_t> subset;
        if (m == n) {
            subset.resize(n);
            std::iota(subset.begin(), subset.end(), std::size_t{0});
            return subset;
        }
        std::vector<std::size_t> pool;
        pool.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            if (!has_keep || i != keep) pool.push_back(i);
        const std::size_t want = has_keep ? m - 1 : m;
        std::sample(pool.begin(), pool.end(), std::back_inserter(subset), want, rng);
        if (has_keep) subset.push_back(keep);
        std::sort(subset.begin(), subset.end());
        return subset;
    };

    State x = x0;
    double lpx = target.log_pi(x);
    std::vector<std::size_t> subset = draw_subset(target.neighbor_count(x), 0, false);
    std::vector<double> nlp, slp(m), leta(m);
    const double log_m = std::log(static_cast<double>(m));
    for (std::uint64_t k = 0;; ++k) {
        if (out_of_budget(config, ledger, stats)) break;
        const std::size_t n = target.neighbor_count(x);
        const double log_nx = std::log(static_cast<double>(n));
        if (m == n) {
            nlp.resize(n);
            target.neighbor_log_pis(x, lpx, nlp);
            std::copy(nlp.begin(), nlp.end(), slp.begin());
        } else {
            for (std::size_t s = 0; s < m; ++s) slp[s] = target.neighbor_log_pi(x, lpx, subset[s]);
        }
        ledger.charge(m);
        for (std::size_t s = 0; s < m; ++s)
            leta[s] = neighbor_log_eta(target, config.h, x, lpx, subset[s], slp[s], log_nx, 1.0);
        const double log_z = log_sum_exp(leta);
        if (!emit(x, LogWeight((log_m - log_nx) - log_z), ledger.calls(), fingerprint(subset))) break;
        if (k == config.T) break;
        const std::size_t s = sample_categorical_log(leta, rng);
        const std::size_t i = subset[s];
        const std::size_t back = target.reverse_index(x, i);
        State y = target.neighbor(x, i);
        subset = draw_subset(target.neighbor_count(y), back, true);
        lpx = slp[s];
        x = std::move(y);
    }
    stats.calls = ledger.calls();
    return stats;
}

RunStats run_vt_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0,
                    const SampleSink& sink) {
    const LadderConfig& ladder = config.ladder;
    ladder.validate();
    const int J = ladder.J;
    Rng rng(config.seed);
    CallLedger ledger;
    RunStats stats;
    Emitter emit(sink, stats);

    std::vector<double> a(J + 1);
    std::vector<BalancingFunction> rung_h(J + 1);
    for (int j = 0; j <= J; ++j) {
        a[j] = ladder.inverse_temperature(j);
        rung_h[j] = ladder.rung_balancing(j);
    }
    std::vector<double> log_psi = ladder.initial_log_psi.empty() ? std::vector<double>(J + 1, 0.0)
                                                                 : ladder.initial_log_psi;
    const auto rung_degree = [J](int j) { return (j > 0 ? 1 : 0) + (j < J ? 1 : 0); };

    State x = x0;
    double lpx = target.log_pi(x);
    int j = 0;
    std::vector<double> nlp, leta;
    std::vector<int> moves;
    for (std::uint64_t k = 0;; ++k) {
        if (out_of_budget(config, ledger, stats)) break;
        const std::size_t n = target.neighbor_count(x);
        nlp.resize(n);
        target.neighbor_log_pis(x, lpx, nlp);
        ledger.charge(n);
        moves.clear();
        if (j > 0) moves.push_back(j - 1);
        if (j < J) moves.push_back(j + 1);
        leta.resize(n + moves.size());
        informed_log_weights(target, rung_h[j], x, lpx, nlp, std::span<double>(leta.data(), n), a[j]);
        const double log_q_out = -std::log(static_cast<double>(rung_degree(j)));
        for (std::size_t t = 0; t < moves.size(); ++t) {
            const int l = moves[t];
            const double log_q_back = -std::log(static_cast<double>(rung_degree(l)));
            const double log_ratio = (a[l] - a[j]) * lpx + log_psi[l] - log_psi[j] + log_q_back - log_q_out;
            leta[n + t] = log_q_out + ladder.h_star.log_apply(log_ratio);
        }
        const double log_z = log_sum_exp(leta);
        const LogWeight w = j == 0 ? LogWeight((1.0 - a[0]) * lpx - log_psi[0] - log_z) : LogWeight::zero();
        if (!emit(x, w, ledger.calls(), j)) break;
        if (k == config.T) break;
        const int current = j;
        const std::size_t pick = sample_categorical_log(leta, rng);
        if (pick < n) {
            lpx = nlp[pick];
            x = target.neighbor(x, pick);
        } else {
            j = moves[pick - n];
        }
        const bool adapting = ladder.adapt && J > 0 && (ladder.freeze_after == 0 || k < ladder.freeze_after);
        if (adapting) {
            const double step = ladder.s0 / (ladder.n0 + static_cast<double>(k));
            for (int l = 0; l <= J; ++l) log_psi[l] += l == current ? -step : step / J;
        }
    }
    stats.calls = ledger.calls();
    return stats;
}

RunStats run_p_iit(const PseudoMarginalTarget& target, const SamplerConfig& config, const State& x0,
                   const SampleSink& sink) {
    const GeomABCTarget* abc = nullptr;
    if (config.abc_correction) {
        abc = dynamic_cast<const GeomABCTarget*>(&target);
        if (abc == nullptr) throw ConfigError("the 1/B(x) correction is only defined for the geometric ABC target");
    }
    Rng rng(config.seed);
    CallLedger ledger;
    RunStats stats;
    Emitter emit(sink, stats);
    const auto estimate = [&](const State& s) {
        ledger.charge(1);
        return target.log_pi_estimate(s, rng);
    };

    State x = x0;
    LogWeight xest = estimate(x);
    while (xest.is_zero()) xest = estimate(x);
    std::vector<LogWeight> nest(target.neighbor_count(x));
    for (std::size_t i = 0; i < nest.size(); ++i) nest[i] = estimate(target.neighbor(x, i));

    std::vector<double> leta;
    for (std::uint64_t k = 0;; ++k) {
        if (out_of_budget(config, ledger, stats)) break;
        const std::size_t n = nest.size();
        const double log_nx = std::log(static_cast<double>(n));
        leta.resize(n);
        double log_z = kNegInf;
        for (;;) {
            for (std::size_t i = 0; i < n; ++i)
                leta[i] = nest[i].is_zero()
                              ? kNegInf
                              : neighbor_log_eta(target, config.h, x, xest.log(), i, nest[i].log(), log_nx, 1.0);
            log_z = log_sum_exp(leta);
            if (log_z > kNegInf) break;
            ++stats.redraws;
            for (std::size_t i = 0; i < n; ++i) nest[i] = estimate(target.neighbor(x, i));
        }
        double log_w = -log_z;
        if (abc != nullptr) log_w -= std::log(abc->nonzero_neighbor_probability(x[0]));
        if (!emit(x, LogWeight(log_w), ledger.calls())) break;
        if (k == config.T) break;
        const std::size_t i = sample_categorical_log(leta, rng);
        const std::size_t back = target.reverse_index(x, i);
        State y = target.neighbor(x, i);
        const LogWeight yest = nest[i];
        std::vector<LogWeight> next(target.neighbor_count(y));
        for (std::size_t t = 0; t < next.size(); ++t) next[t] = t == back ? xest : estimate(target.neighbor(y, t));
        x = std::move(y);
        xest = yest;
        nest = std::move(next);
    }
    stats.calls = ledger.calls();
    return stats;
}

RunStats run_p_mh(const PseudoMarginalTarget& target, const SamplerConfig& config, const State& x0,
                  const SampleSink& sink) {
    require_bounded(config.h);
    Rng rng(config.seed);
    CallLedger ledger;
    RunStats stats;
    Emitter emit(sink, stats);
    const auto estimate = [&](const State& s) {
        ledger.charge(1);
        return target.log_pi_estimate(s, rng);
    };

    State x = x0;
    LogWeight xest = estimate(x);
    while (xest.is_zero()) xest = estimate(x);
    std::uint64_t sojourn = 0;
    for (;;) {
        if (out_of_budget(config, ledger, stats)) {
            // The pending state holds its arrival plus every rejection so far.
            emit(x, LogWeight(std::log(static_cast<double>(sojourn + 1))), ledger.calls());
            break;
        }
        const std::size_t n = target.neighbor_count(x);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        const std::size_t i = pick(rng);
        State y = target.neighbor(x, i);
        const LogWeight yest = estimate(y);
        ++sojourn;
        bool accept = false;
        if (!yest.is_zero()) {
            const double log_nx = std::log(static_cast<double>(n));
            const double log_alpha = neighbor_log_eta(target, config.h, x, xest.log(), i, yest.log(), log_nx, 1.0) + log_nx;
            accept = uniform01(rng) < std::exp(log_alpha);
        }
        if (!accept) continue;
        if (!emit(x, LogWeight(std::log(static_cast<double>(sojourn))), ledger.calls())) break;
        if (stats.samples > config.T) break;
        x = std::move(y);
        xest = yest;
        sojourn = 0;
    }
    stats.calls = ledger.calls();
    return stats;
}

RunStats run_sampler(const DiscreteTarget& target, const SamplerConfig& config, const State& x0,
                     const SampleSink& sink) {
    config.validate();
    const auto pseudo = [&]() -> const PseudoMarginalTarget& {
        const auto* pm = dynamic_cast<const PseudoMarginalTarget*>(&target);
        if (pm == nullptr)
            throw ConfigError(to_string(config.algorithm) + " needs a target with a posterior estimator");
        return *pm;
    };
    switch (config.algorithm) {
        case Algorithm::NaiveIIT: return run_naive_iit(target, config, x0, sink);
        case Algorithm::MHIIT: return run_mh_iit(target, config, x0, sink);
        case Algorithm::RNIIT: return run_rn_iit(target, config, x0, sink);
        case Algorithm::CTIIT: return run_ct_iit(target, config, x0, sink);
        case Algorithm::VTIIT: return run_vt_iit(target, config, x0, sink);
        case Algorithm::UninformedMH: return run_uninformed_mh(target, config, x0, sink);
        case Algorithm::PIIT: return run_p_iit(pseudo(), config, x0, sink);
        case Algorithm::PMH: return run_p_mh(pseudo(), config, x0, sink);
        case Algorithm::MTIT: break;
    }
    throw ConfigError("mt-it runs on general state spaces; use run_mt_it");
}

WeightedSampleStream run_sampler(const DiscreteTarget& target, const SamplerConfig& config, const State& x0) {
    return collect([&](const SampleSink& s) { return run_sampler(target, config, x0, s); });
}

WeightedSampleStream run_naive_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0) {
    return collect([&](const SampleSink& s) { return run_naive_iit(target, config, x0, s); });
}

WeightedSampleStream run_mh_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0) {
    return collect([&](const SampleSink& s) { return run_mh_iit(target, config, x0, s); });
}

WeightedSampleStream run_rn_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0) {
    return collect([&](const SampleSink& s) { return run_rn_iit(target, config, x0, s); });
}

WeightedSampleStream run_ct_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0) {
    return collect([&](const SampleSink& s) { return run_ct_iit(target, config, x0, s); });
}

WeightedSampleStream run_vt_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0) {
    return collect([&](const SampleSink& s) { return run_vt_iit(target, config, x0, s); });
}

WeightedSampleStream run_uninformed_mh(const DiscreteTarget& target, const SamplerConfig& config, const State& x0) {
    return collect([&](const SampleSink& s) { return run_uninformed_mh(target, config, x0, s); });
}

WeightedSampleStream run_p_iit(const PseudoMarginalTarget& target, const SamplerConfig& config, const State& x0) {
    return collect([&](const SampleSink& s) { return run_p_iit(target, config, x0, s); });
}

WeightedSampleStream run_p_mh(const PseudoMarginalTarget& target, const SamplerConfig& config, const State& x0) {
    return collect([&](const SampleSink& s) { return run_p_mh(target, config, x0, s); });
}

RunStats run_mt_it(const GeneralTarget& target, const ProposalKernel& kernel, const SamplerConfig& config,
                   const Point& x0, const PointSink& sink) {
    const std::size_t m = config.m;
    if (m < 2) throw ConfigError("MT-IT needs m >= 2");
    Rng rng(config.seed);
    CallLedger ledger;
    RunStats stats;
    Point x = x0;
    double lpx = target.log_pi(x);
    std::vector<Point> candidates(m);
    std::vector<double> clp(m, 0.0), leta(m);
    std::vector<bool> known(m, false);
    for (std::size_t i = 0; i < m; ++i) candidates[i] = kernel.sample(x, rng);
    for (std::uint64_t k = 0;; ++k) {
        if (out_of_budget(config, ledger, stats)) break;
        for (std::size_t i = 0; i < m; ++i)
            if (!known[i]) clp[i] = target.log_pi(candidates[i]);
        ledger.charge(m);
        for (std::size_t i = 0; i < m; ++i) {
            double log_r = clp[i] - lpx;
            if (!kernel.symmetric()) log_r += kernel.log_density(x, candidates[i]) - kernel.log_density(candidates[i], x);
            leta[i] = config.h.log_apply(log_r);
        }
        const double log_z = log_sum_exp(leta);
        ++stats.samples;
        if (!sink(PointView{x, LogWeight(-log_z), ledger.calls()})) {
            stats.stopped_early = true;
            break;
        }
        if (k == config.T) break;
        const std::size_t pick = sample_categorical_log(leta, rng);
        Point next = std::move(candidates[pick]);
        const double next_lp = clp[pick];
        candidates[0] = std::move(x);
        clp[0] = lpx;
        known[0] = true;
        for (std::size_t i = 1; i < m; ++i) {
            candidates[i] = kernel.sample(next, rng);
            known[i] = false;
        }
        x = std::move(next);
        lpx = next_lp;
    }
    stats.calls = ledger.calls();
    return stats;
}

}  // namespace iit
