#include <doctest.h>

#include <cmath>
#include <vector>

#include "iit/abc.hpp"
#include "iit/continuous.hpp"
#include "iit/diagnostics.hpp"
#include "iit/errors.hpp"
#include "iit/samplers.hpp"
#include "iit/toys.hpp"

using namespace iit;

namespace {

struct Trace {
    std::vector<State> states;
    std::vector<LogWeight> weights;
    std::vector<std::uint64_t> calls;
    std::vector<std::int64_t> aux;
};

Trace trace(const DiscreteTarget& target, const SamplerConfig& config, const State& x0) {
    Trace t;
    run_sampler(target, config, x0, [&](const SampleView& s) {
        t.states.push_back(s.state);
        t.weights.push_back(s.log_weight);
        t.calls.push_back(s.calls);
        t.aux.push_back(s.aux);
        return true;
    });
    return t;
}

SamplerConfig make_config(Algorithm algorithm, BalancingFunction h, std::uint64_t T, std::uint64_t seed) {
    SamplerConfig c;
    c.algorithm = algorithm;
    c.h = h;
    c.T = T;
    c.seed = seed;
    return c;
}

// Moments of the mixed weight estimator from its round structure: each round stops with the informed
// branch (probability rho, adds 1/Z), stops with an accepted local move (probability (1-rho) Z, adds 1)
// or fails (adds 1 and repeats).
struct MixedOracle {
    double mean, variance, calls;
};

MixedOracle mixed_oracle(double Z, double rho, double n) {
    const double stop = rho + (1.0 - rho) * Z;
    const double fail = 1.0 - stop;
    const double p_informed = rho / stop, p_accept = (1.0 - rho) * Z / stop;
    const double mean_fail = fail / stop, var_fail = fail / (stop * stop);
    const double mean_tail = p_informed / Z + p_accept;
    const double second_tail = p_informed / (Z * Z) + p_accept;
    const double mean_local = (1.0 - rho) / stop;
    return {mean_fail + mean_tail, var_fail + second_tail - mean_tail * mean_tail, mean_local + n * rho / stop};
}

double f_zero(const ToyTarget& t, const State& x) { return t.summary_key(x) == 0 ? 1.0 : 0.0; }

class FlatTarget : public GeneralTarget {
public:
    std::size_t dimension() const override { return 2; }
    double log_pi(const Point&) const override { return 0.0; }
    std::string describe() const override { return "flat"; }
};

}  // namespace

TEST_CASE("round-structure oracle agrees with the closed forms") {
    for (double Z : {0.05, 0.3, 0.9}) {
        for (double rho : {0.0, 0.25, 0.5, 1.0}) {
            const double n = 6.0;
            const auto o = mixed_oracle(Z, rho, n);
            CHECK(o.mean == doctest::Approx(1.0 / Z).epsilon(1e-12));
            CHECK(o.variance == doctest::Approx((1.0 - Z) * (1.0 - rho) / (Z * Z + rho * Z * (1.0 - Z))).epsilon(1e-10));
            CHECK(o.calls == doctest::Approx((rho * (n - 1.0) + 1.0) / (rho * (1.0 - Z) + Z)).epsilon(1e-12));
        }
    }
}

TEST_CASE("mixed weight estimator is unbiased with the predicted variance and cost") {
    const ToyTarget target({ToyExample::Toy1, 6, 2, 1.0});
    const auto h = BalancingFunction::min_one();
    const std::vector<State> states = {State{1, 1, 0, 0, 0, 0}, State{0, 1, 1, 0, 1, 0}, State{1, 0, 1, 0, 0, 0}};
    constexpr int draws = 100000;
    Rng rng(31);
    for (const State& x : states) {
        const double Z = std::exp(compute_log_Z(target, h, x));
        for (double rho : {0.0, 0.25, 0.5, 1.0}) {
            const auto oracle = mixed_oracle(Z, rho, 6.0);
            double s = 0.0, s2 = 0.0, c = 0.0, c2 = 0.0;
            for (int k = 0; k < draws; ++k) {
                const auto d = estimate_weight_mh(target, h, x, rho, rng);
                const double w = std::exp(d.log_w);
                s += w;
                s2 += w * w;
                c += static_cast<double>(d.calls);
                c2 += static_cast<double>(d.calls) * static_cast<double>(d.calls);
            }
            const double mean = s / draws, var = s2 / draws - mean * mean;
            const double call_mean = c / draws, call_var = c2 / draws - call_mean * call_mean;
            if (rho == 1.0) {
                CHECK(mean == doctest::Approx(1.0 / Z).epsilon(1e-9));
                CHECK(var < 1e-9 * mean * mean);
                CHECK(call_mean == 6.0);
                continue;
            }
            CHECK(std::abs(mean - 1.0 / Z) < 4.0 * std::sqrt(var / draws));
            CHECK(std::abs(var / oracle.variance - 1.0) < 0.10);
            CHECK(std::abs(call_mean - oracle.calls) < 4.0 * std::sqrt(call_var / draws));
        }
    }
}

TEST_CASE("A-over-N informed probability keeps the cost below both bounds") {
    const ToyTarget target({ToyExample::Toy1, 8, 4, 2.0});
    const auto h = BalancingFunction::min_one();
    Rng rng(8);
    for (double A : {0.5, 1.0, 3.0}) {
        for (const State& x : {target.modes().front(), State(8, 0)}) {
            const double Z = std::exp(compute_log_Z(target, h, x));
            const double rho = RhoMode::a_over_n(A).at(8);
            CHECK(rho == doctest::Approx(A / 8.0));
            constexpr int draws = 40000;
            double c = 0.0, c2 = 0.0;
            for (int k = 0; k < draws; ++k) {
                const double calls = static_cast<double>(estimate_weight_mh(target, h, x, rho, rng).calls);
                c += calls;
                c2 += calls * calls;
            }
            const double mean = c / draws, se = std::sqrt((c2 / draws - mean * mean) / draws);
            const double bound = std::min((A + 1.0) * 8.0 / A, (A + 1.0) / Z);
            CHECK(mean <= bound + 4.0 * se);
            CHECK(std::abs(mean - mixed_oracle(Z, rho, 8.0).calls) < 4.0 * se);
        }
    }
}

TEST_CASE("degenerate settings reproduce naive IIT exactly") {
    const ToyTarget target({ToyExample::Toy1, 7, 2, 1.3});
    const State x0(7, 0);
    const auto base = trace(target, make_config(Algorithm::NaiveIIT, BalancingFunction::min_one(), 300, 42), x0);

    auto mh = make_config(Algorithm::MHIIT, BalancingFunction::min_one(), 300, 42);
    mh.rho = RhoMode::constant(1.0);
    const auto mh_trace = trace(target, mh, x0);
    CHECK(mh_trace.states == base.states);
    CHECK(mh_trace.weights == base.weights);
    CHECK(mh_trace.calls == base.calls);

    auto ct = make_config(Algorithm::CTIIT, BalancingFunction::min_one(), 300, 42);
    ct.a = 1.0;
    const auto ct_trace = trace(target, ct, x0);
    CHECK(ct_trace.states == base.states);
    CHECK(ct_trace.weights == base.weights);

    auto rn = make_config(Algorithm::RNIIT, BalancingFunction::min_one(), 300, 42);
    rn.m = 7;
    const auto rn_trace = trace(target, rn, x0);
    CHECK(rn_trace.states == base.states);
    CHECK(rn_trace.calls == base.calls);
    for (std::size_t k = 0; k < base.weights.size(); ++k)
        CHECK(rn_trace.weights[k].log() == doctest::Approx(base.weights[k].log()).epsilon(1e-12));

    auto vt = make_config(Algorithm::VTIIT, BalancingFunction::min_one(), 300, 42);
    vt.ladder.J = 0;
    const auto vt_trace = trace(target, vt, x0);
    CHECK(vt_trace.states == base.states);
    for (std::size_t k = 0; k < base.weights.size(); ++k)
        CHECK(vt_trace.weights[k].log() == doctest::Approx(base.weights[k].log()).epsilon(1e-12));

    const NoisyToy2Target noiseless(7, 1.3, 0.0);
    const auto toy2 = trace(noiseless.exact(), make_config(Algorithm::NaiveIIT, BalancingFunction::sqrt(), 300, 5), x0);
    const auto p_iit = trace(noiseless, make_config(Algorithm::PIIT, BalancingFunction::sqrt(), 300, 5), x0);
    CHECK(p_iit.states == toy2.states);
    for (std::size_t k = 0; k < toy2.weights.size(); ++k)
        CHECK(p_iit.weights[k].log() == doctest::Approx(toy2.weights[k].log()).epsilon(1e-12));
}

TEST_CASE("never-informed mixed sampler is uninformed MH in sojourn form") {
    const ToyTarget target({ToyExample::Toy1, 6, 2, 0.7});
    auto mh = make_config(Algorithm::MHIIT, BalancingFunction::min_one(), 500, 9);
    mh.rho = RhoMode::constant(0.0);
    const auto a = trace(target, mh, State(6, 0));
    const auto b = trace(target, make_config(Algorithm::UninformedMH, BalancingFunction::min_one(), 500, 9), State(6, 0));
    CHECK(a.states == b.states);
    CHECK(a.weights == b.weights);
    for (std::size_t k = 1; k < a.states.size(); ++k) CHECK(a.states[k] != a.states[k - 1]);
    for (const auto& w : a.weights) {
        const double sojourn = std::exp(w.log());
        CHECK(sojourn == doctest::Approx(std::round(sojourn)));
        CHECK(sojourn >= 1.0);
    }
}

TEST_CASE("uninformed MH on a flat target accepts every proposal") {
    const ToyTarget flat({ToyExample::Toy1, 5, 1, 1e-300});
    const auto t = trace(flat, make_config(Algorithm::UninformedMH, BalancingFunction::min_one(), 200, 1), State(5, 0));
    for (const auto& w : t.weights) CHECK(w.log() == 0.0);
    CHECK(t.calls.back() == 200 + 1);
}

TEST_CASE("posterior-call ledger") {
    const ToyTarget target({ToyExample::Toy2, 9, 1, 1.0});
    const State x0(9, 0);
    const auto naive = trace(target, make_config(Algorithm::NaiveIIT, BalancingFunction::sqrt(), 250, 2), x0);
    CHECK(naive.states.size() == 251);
    for (std::size_t k = 0; k < naive.calls.size(); ++k) CHECK(naive.calls[k] == (k + 1) * 9);

    auto rn = make_config(Algorithm::RNIIT, BalancingFunction::sqrt(), 250, 2);
    rn.m = 3;
    const auto rn_trace = trace(target, rn, x0);
    for (std::size_t k = 0; k < rn_trace.calls.size(); ++k) CHECK(rn_trace.calls[k] == (k + 1) * 3);

    const GaussianTarget gauss({3, 0.0});
    const GaussianRandomWalk walk(0.5);
    auto mt = make_config(Algorithm::MTIT, BalancingFunction::sqrt(), 100, 4);
    mt.m = 5;
    std::vector<std::uint64_t> calls;
    run_mt_it(gauss, walk, mt, Point(3, 1.0), [&](const PointView& v) {
        calls.push_back(v.calls);
        return true;
    });
    CHECK(calls.size() == 101);
    for (std::size_t k = 0; k < calls.size(); ++k) CHECK(calls[k] == (k + 1) * 5);
}

TEST_CASE("call budget stops a run") {
    const ToyTarget target({ToyExample::Toy1, 10, 1, 1.0});
    auto c = make_config(Algorithm::NaiveIIT, BalancingFunction::sqrt(), 1000000, 3);
    c.max_calls = 1000;
    const auto stream = run_naive_iit(target, c, State(10, 0));
    CHECK(stream.total_calls() == 1000);
    CHECK(stream.stats.stopped_early);
}

TEST_CASE("runs are reproducible from the seed") {
    const ToyTarget target({ToyExample::Toy3, 10, 3, 1.0});
    for (Algorithm a : {Algorithm::NaiveIIT, Algorithm::MHIIT, Algorithm::RNIIT, Algorithm::VTIIT, Algorithm::UninformedMH}) {
        auto c = make_config(a, BalancingFunction::min_one(), 400, 77);
        c.ladder.J = 2;
        const auto x = trace(target, c, State(10, 0));
        const auto y = trace(target, c, State(10, 0));
        CHECK(x.states == y.states);
        CHECK(x.weights == y.weights);
        c.seed = 78;
        CHECK(trace(target, c, State(10, 0)).states != x.states);
    }
}

TEST_CASE("configuration errors") {
    const ToyTarget target({ToyExample::Toy1, 4, 1, 1.0});
    const State x0(4, 0);
    CHECK_THROWS_AS(run_sampler(target, make_config(Algorithm::MHIIT, BalancingFunction::sqrt(), 10, 1), x0), ConfigError);
    auto rn = make_config(Algorithm::RNIIT, BalancingFunction::sqrt(), 10, 1);
    rn.m = 1;
    CHECK_THROWS_AS(run_sampler(target, rn, x0), ConfigError);
    rn.m = 5;
    CHECK_THROWS_AS(run_sampler(target, rn, x0), ConfigError);
    auto ct = make_config(Algorithm::CTIIT, BalancingFunction::sqrt(), 10, 1);
    ct.a = 0.0;
    CHECK_THROWS_AS(run_sampler(target, ct, x0), ConfigError);
    CHECK_THROWS_AS(run_sampler(target, make_config(Algorithm::PIIT, BalancingFunction::sqrt(), 10, 1), x0), ConfigError);
    CHECK_THROWS_AS(run_sampler(target, make_config(Algorithm::MTIT, BalancingFunction::sqrt(), 10, 1), x0), ConfigError);
    auto mh = make_config(Algorithm::MHIIT, BalancingFunction::min_one(), 10, 1);
    mh.rho = RhoMode::constant(1.5);
    CHECK_THROWS_AS(run_sampler(target, mh, x0), ConfigError);
    CHECK_THROWS_AS(parse_algorithm("gibbs"), ConfigError);
    for (Algorithm a : {Algorithm::NaiveIIT, Algorithm::MHIIT, Algorithm::RNIIT, Algorithm::CTIIT, Algorithm::VTIIT,
                        Algorithm::PIIT, Algorithm::PMH, Algorithm::MTIT, Algorithm::UninformedMH})
        CHECK(parse_algorithm(to_string(a)) == a);
}

TEST_CASE("importance-tempered estimates converge to the closed form") {
    const ToyTarget target({ToyExample::Toy1, 3, 1, 1.0});
    const double truth = 1.0 / std::pow(1.0 + std::exp(-1.0), 3);
    const auto f = [&](const State& x) { return f_zero(target, x); };
    const State x0(3, 0);

    const auto naive = run_naive_iit(target, make_config(Algorithm::NaiveIIT, BalancingFunction::min_one(), 100000, 1), x0);
    CHECK(std::abs(self_normalized_estimate(naive, f).value - truth) < 0.01);

    auto mh = make_config(Algorithm::MHIIT, BalancingFunction::min_one(), 100000, 2);
    mh.rho = RhoMode::constant(0.025);
    CHECK(std::abs(self_normalized_estimate(run_mh_iit(target, mh, x0), f).value - truth) < 0.005);

    auto rn = make_config(Algorithm::RNIIT, BalancingFunction::min_one(), 200000, 3);
    rn.m = 2;
    CHECK(std::abs(self_normalized_estimate(run_rn_iit(target, rn, x0), f).value - truth) < 0.01);

    auto ct = make_config(Algorithm::CTIIT, BalancingFunction::sqrt(), 100000, 4);
    ct.a = 0.5;
    CHECK(std::abs(self_normalized_estimate(run_ct_iit(target, ct, x0), f).value - truth) < 0.01);

    auto vt = make_config(Algorithm::VTIIT, BalancingFunction::min_one(), 200000, 5);
    vt.ladder.J = 2;
    vt.ladder.delta = 1.0;
    vt.ladder.method = LadderMethod::M2;
    vt.ladder.freeze_after = 20000;
    const auto vt_stream = run_vt_iit(target, vt, x0);
    CHECK(std::abs(self_normalized_estimate(vt_stream, f, 0.2).value - truth) < 0.01);

    const auto mh_plain = run_uninformed_mh(target, make_config(Algorithm::UninformedMH, BalancingFunction::min_one(), 100000, 6), x0);
    CHECK(std::abs(self_normalized_estimate(mh_plain, f).value - truth) < 0.01);
}

TEST_CASE("random-neighborhood weights are unbiased on an irregular graph") {
    const EnumeratedTarget graph({0.0, 1.0, -0.5, 2.0}, {{1, 2, 3}, {0, 2}, {0, 1, 3}, {0, 2}});
    const double total = std::exp(0.0) + std::exp(1.0) + std::exp(-0.5) + std::exp(2.0);
    auto rn = make_config(Algorithm::RNIIT, BalancingFunction::sqrt(), 300000, 12);
    rn.m = 2;
    const auto stream = run_rn_iit(graph, rn, State{0});
    for (std::int32_t s = 0; s < 4; ++s) {
        const double est = self_normalized_estimate(stream, [&](const State& x) { return x[0] == s ? 1.0 : 0.0; }).value;
        CHECK(std::abs(est - std::exp(graph.log_pi(State{s})) / total) < 0.01);
    }
}

TEST_CASE("tempered sampler moves across rungs and weights only the cold rung") {
    const ToyTarget target({ToyExample::Toy3, 8, 3, 2.0});
    auto vt = make_config(Algorithm::VTIIT, BalancingFunction::min_one(), 5000, 3);
    vt.ladder.J = 3;
    vt.ladder.delta = 1.0;
    vt.ladder.method = LadderMethod::M3;
    const auto t = trace(target, vt, State(8, 0));
    std::vector<int> visits(4, 0);
    for (std::size_t k = 0; k < t.aux.size(); ++k) {
        REQUIRE(t.aux[k] >= 0);
        REQUIRE(t.aux[k] <= 3);
        ++visits[static_cast<std::size_t>(t.aux[k])];
        CHECK(t.weights[k].is_zero() == (t.aux[k] != 0));
    }
    for (int v : visits) CHECK(v > 0);
}

TEST_CASE("ladder construction") {
    LadderConfig ladder;
    ladder.J = 4;
    ladder.delta = 2.0;
    CHECK(ladder.inverse_temperature(0) == 1.0);
    CHECK(ladder.inverse_temperature(4) == doctest::Approx(1.0 / 9.0));
    ladder.method = LadderMethod::M2;
    CHECK(ladder.rung_balancing(1) == BalancingFunction::sqrt());
    CHECK(ladder.rung_balancing(2) == BalancingFunction::min_one());
    ladder.method = LadderMethod::M3;
    CHECK(ladder.rung_balancing(3) == BalancingFunction::sqrt());
    CHECK(ladder.rung_balancing(4) == BalancingFunction::min_one());
    ladder.method = LadderMethod::M1;
    for (int j = 0; j <= 4; ++j) CHECK(ladder.rung_balancing(j) == BalancingFunction::min_one());
    ladder.delta = 0.0;
    CHECK_THROWS_AS(ladder.validate(), ConfigError);
}

TEST_CASE("pseudo-marginal samplers on the geometric ABC target") {
    const GeomABCTarget target({});
    auto p_iit = make_config(Algorithm::PIIT, BalancingFunction::sqrt(), 2000, 4);
    const auto stream = run_p_iit(target, p_iit, State{3});
    CHECK(stream.size() == 2001);
    for (const auto& s : stream.states()) CHECK(s[0] >= 1);
    auto corrected = p_iit;
    corrected.abc_correction = true;
    CHECK_NOTHROW(run_p_iit(target, corrected, State{3}));
    const auto pmh = run_p_mh(target, make_config(Algorithm::PMH, BalancingFunction::min_one(), 2000, 4), State{3});
    CHECK(pmh.stats.calls == pmh.total_calls());
    const NoisyToy2Target noisy(6, 1.0, 0.3);
    corrected.seed = 1;
    CHECK_THROWS_AS(run_p_iit(noisy, corrected, State(6, 0)), ConfigError);
}

TEST_CASE("multiple-try sampler") {
    SUBCASE("equal ratios give weight 1 / (m h(1))") {
        const FlatTarget flat;
        const GaussianRandomWalk walk(1.0);
        for (const auto& h : {BalancingFunction::sqrt(), BalancingFunction::barker()}) {
            auto c = make_config(Algorithm::MTIT, h, 50, 2);
            c.m = 4;
            run_mt_it(flat, walk, c, Point(2, 0.0), [&](const PointView& v) {
                CHECK(v.log_weight.log() == doctest::Approx(-std::log(4.0) - h.log_apply(0.0)).epsilon(1e-14));
                return true;
            });
        }
    }
    SUBCASE("second moment of a standard normal") {
        const GaussianTarget gauss({4, 0.0});
        const GaussianRandomWalk walk(gauss.spec().proposal_sigma());
        auto c = make_config(Algorithm::MTIT, BalancingFunction::sqrt(), 40000, 6);
        c.m = 10;
        std::vector<LogWeight> w;
        std::vector<double> sq;
        run_mt_it(gauss, walk, c, Point(4, 3.0), [&](const PointView& v) {
            double s = 0.0;
            for (double z : v.point) s += z * z;
            w.push_back(v.log_weight);
            sq.push_back(s);
            return true;
        });
        const std::size_t half = w.size() / 2;
        const auto est = self_normalized_estimate(std::span<const LogWeight>(w).subspan(half),
                                                  std::span<const double>(sq).subspan(half));
        CHECK(std::abs(est.value - 4.0) < 0.3);
    }
}
