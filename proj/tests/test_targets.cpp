#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <vector>

#include "iit/abc.hpp"
#include "iit/continuous.hpp"
#include "iit/errors.hpp"
#include "iit/log_math.hpp"
#include "iit/toys.hpp"
#include "iit/varsel.hpp"

using namespace iit;

namespace {

State bits_of(unsigned code, int p) {
    State x(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) x[static_cast<std::size_t>(i)] = (code >> i) & 1u;
    return x;
}

// Exact law of the summary key by brute-force enumeration of {0,1}^p.
std::map<std::int64_t, double> enumerate_law(const ToyTarget& target) {
    const int p = target.spec().p;
    std::vector<double> log_pi;
    std::vector<std::int64_t> keys;
    for (unsigned code = 0; code < (1u << p); ++code) {
        const State x = bits_of(code, p);
        log_pi.push_back(target.log_pi(x));
        keys.push_back(target.summary_key(x));
    }
    const double log_c = log_sum_exp(log_pi);
    std::map<std::int64_t, double> law;
    for (std::size_t k = 0; k < keys.size(); ++k) law[keys[k]] += std::exp(log_pi[k] - log_c);
    return law;
}

}  // namespace

TEST_CASE("toy log densities at reference states") {
    const ToyTarget toy1({ToyExample::Toy1, 8, 3, 2.0});
    CHECK(toy1.log_pi(toy1.modes().front()) == 0.0);

    const ToyTarget toy2({ToyExample::Toy2, 500, 1, 0.7});
    State x(500, 0);
    CHECK(toy2.log_pi(x) == doctest::Approx(-0.7 * 1000.0));
    x[0] = 1;
    CHECK(toy2.log_pi(x) == 0.0);

    const ToyTarget toy3({ToyExample::Toy3, 10, 4, 1.0});
    const auto& modes = toy3.modes();
    int distance = 0;
    for (std::size_t i = 0; i < modes[0].size(); ++i) distance += modes[0][i] != modes[1][i];
    CHECK(distance == 2);
    CHECK(toy3.log_pi(modes[0]) == doctest::Approx(std::log1p(std::exp(-2.0))).epsilon(1e-14));
    CHECK(toy_log_pi(toy3.spec(), modes[1]) == doctest::Approx(std::log1p(std::exp(-2.0))).epsilon(1e-14));
}

TEST_CASE("toy spec validation") {
    CHECK_THROWS_AS(ToyTarget({ToyExample::Toy1, 5, 6, 1.0}), ConfigError);
    CHECK_THROWS_AS(ToyTarget({ToyExample::Toy1, 5, 1, 0.0}), ConfigError);
    CHECK_THROWS_AS(ToyTarget({ToyExample::Toy4, 5, 2, 1.0}), ConfigError);
    CHECK_THROWS_AS(ToyTarget({ToyExample::Toy4, 5, 4, 1.0}), ConfigError);
    CHECK_NOTHROW(ToyTarget({ToyExample::Toy4, 6, 4, 1.0}));
    const ToyTarget toy({ToyExample::Toy1, 4, 1, 1.0});
    CHECK_THROWS_AS(toy.log_pi(State(3, 0)), std::invalid_argument);
}

TEST_CASE("single-mode push-forward has the binomial closed form") {
    const auto law = toy_pushforward_exact({ToyExample::Toy1, 3, 1, 1.0});
    const double p0 = 1.0 / std::pow(1.0 + std::exp(-1.0), 3);
    CHECK(p0 == doctest::Approx(0.39073).epsilon(1e-4));
    CHECK(law.probability_of(0) == doctest::Approx(p0).epsilon(1e-14));
    const double binom[] = {1, 3, 3, 1};
    for (int k = 0; k <= 3; ++k) CHECK(law.probability_of(k) == doctest::Approx(binom[k] * std::exp(-k) * p0).epsilon(1e-13));

    const auto sharp = toy_pushforward_exact({ToyExample::Toy1, 3, 1, 50.0});
    CHECK(std::abs(sharp.probability_of(0) - 1.0) < 1e-20);
}

TEST_CASE("push-forward laws match exhaustive enumeration") {
    const std::vector<ToySpec> specs = {{ToyExample::Toy1, 7, 3, 0.8}, {ToyExample::Toy2, 4, 1, 1.0},
                                        {ToyExample::Toy2, 10, 1, 0.4}, {ToyExample::Toy3, 9, 4, 1.3},
                                        {ToyExample::Toy4, 10, 5, 0.9}, {ToyExample::Toy1, 12, 6, 0.3}};
    for (const auto& spec : specs) {
        const ToyTarget target(spec);
        const auto brute = enumerate_law(target);
        const auto exact = target.exact_pushforward();
        double total = 0.0;
        for (double q : exact.probabilities()) total += q;
        CHECK(std::abs(total - 1.0) < 1e-12);
        for (const auto& [key, mass] : brute) CHECK(std::abs(exact.probability_of(key) - mass) < 1e-12);
        for (std::size_t k = 0; k < exact.size(); ++k)
            CHECK(std::abs(exact.probabilities()[k] - brute.at(exact.keys()[k])) < 1e-12);
    }
}

TEST_CASE("two-branch statistic collapses the unselected branch") {
    const ToyTarget toy2({ToyExample::Toy2, 6, 1, 1.0});
    CHECK(toy2.summary_key(bits_of(0b000000, 6)) == 6);
    CHECK(toy2.summary_key(bits_of(0b111110, 6)) == 6);
    CHECK(toy2.summary_key(bits_of(0b000001, 6)) == 0);
    CHECK(toy2.summary_key(bits_of(0b000111, 6)) == 2);
}

TEST_CASE("two-mode targets are symmetric under swapping the modes") {
    for (const ToySpec spec : {ToySpec{ToyExample::Toy3, 8, 3, 1.1}, ToySpec{ToyExample::Toy4, 9, 4, 0.6}}) {
        const ToyTarget target(spec);
        const auto& m = target.modes();
        for (unsigned code = 0; code < (1u << spec.p); ++code) {
            const State x = bits_of(code, spec.p);
            // Swap the coordinates on which the modes differ in a way that exchanges them.
            State swapped = x;
            for (std::size_t i = 0; i < x.size(); ++i)
                if (m[0][i] != m[1][i]) swapped[i] = x[i] == m[0][i] ? m[1][i] : m[0][i];
            CHECK(std::abs(target.log_pi(x) - target.log_pi(swapped)) < 1e-12);
        }
    }
}

TEST_CASE("neighbor log densities agree with direct evaluation") {
    for (const ToySpec spec : {ToySpec{ToyExample::Toy1, 9, 3, 1.1}, ToySpec{ToyExample::Toy2, 9, 1, 2.0},
                               ToySpec{ToyExample::Toy3, 9, 4, 0.5}, ToySpec{ToyExample::Toy4, 9, 4, 0.5}}) {
        const ToyTarget target(spec);
        for (unsigned code : {0u, 5u, 77u, 300u, 511u}) {
            const State x = bits_of(code, 9);
            std::vector<double> out(9);
            target.neighbor_log_pis(x, target.log_pi(x), out);
            for (std::size_t i = 0; i < 9; ++i) CHECK(std::abs(out[i] - target.log_pi(target.neighbor(x, i))) < 1e-12);
        }
    }
}

TEST_CASE("variable-selection posterior basics") {
    const auto data = generate_varsel_data(DataRecipe::IntermediateSNR, 60, 25, 4);
    const VarSelTarget target(data.model);
    CHECK(target.log_pi(State(25, 0)) == 0.0);
    const VarSelModel& model = data.model;
    CHECK(model.projected_fit({2, 7}) == doctest::Approx(model.projected_fit({2, 7, 7, 2})).epsilon(1e-12));
    CHECK(model.c0() == doctest::Approx(model.hyper().nu * std::log(25.0) + 0.5 * std::log1p(model.hyper().g)));
    CHECK(model.c1() == doctest::Approx(model.hyper().g / (2.0 * model.hyper().sigma2 * (model.hyper().g + 1.0))));

    Eigen::MatrixXd design = Eigen::MatrixXd::Random(10, 3);
    design.col(2) = design.col(0) - 2.0 * design.col(1);
    const VarSelModel singular(design, Eigen::VectorXd::Random(10), {1.0, 1.0, 1.0});
    CHECK_THROWS_AS(singular.projected_fit({0, 1, 2}), RankDeficientError);
    CHECK_THROWS_AS(VarSelModel(design, Eigen::VectorXd::Random(10), {0.0, 1.0, 1.0}), ConfigError);
}

TEST_CASE("gram-updated neighbor sweep agrees with direct solves") {
    const auto data = generate_varsel_data(DataRecipe::SixMode, 40, 15, 2);
    const VarSelTarget target(data.model);
    for (const auto& columns : six_mode_sets()) {
        const State x = subset_state(15, columns);
        std::vector<double> out(15);
        target.neighbor_log_pis(x, target.log_pi(x), out);
        for (std::size_t i = 0; i < 15; ++i)
            CHECK(std::abs(out[i] - varsel_log_posterior(data.model, target.neighbor(x, i))) < 1e-8);
    }
}

TEST_CASE("orthogonal calibration reproduces the toy log-ratios") {
    SUBCASE("null and true covariates") {
        const ToySpec spec{ToyExample::Toy1, 6, 2, 1.5};
        const VarSelModel model = calibrated_toy_design(spec, 40, 8);
        const double c0 = model.c0();
        const State empty(6, 0);
        CHECK(varsel_log_posterior(model, subset_state(6, {4})) - varsel_log_posterior(model, empty) ==
              doctest::Approx(-c0).epsilon(1e-10));
        CHECK(c0 == doctest::Approx(spec.theta).epsilon(1e-12));
        CHECK(varsel_log_posterior(model, subset_state(6, {0})) - varsel_log_posterior(model, empty) ==
              doctest::Approx(spec.theta).epsilon(1e-10));
    }
    SUBCASE("every state for every calibrated toy") {
        for (const ToySpec spec : {ToySpec{ToyExample::Toy1, 7, 3, 1.2}, ToySpec{ToyExample::Toy2, 7, 1, 0.9},
                                   ToySpec{ToyExample::Toy3, 7, 4, 1.4}, ToySpec{ToyExample::Toy1, 10, 2, 0.5}}) {
            const ToyTarget toy(spec);
            const VarSelModel model = calibrated_toy_design(spec, 50, 3);
            const State empty(static_cast<std::size_t>(spec.p), 0);
            const double base_vs = varsel_log_posterior(model, empty);
            const double base_toy = toy.log_pi(empty);
            double worst = 0.0;
            for (unsigned code = 0; code < (1u << spec.p); ++code) {
                const State x = bits_of(code, spec.p);
                worst = std::max(worst, std::abs((varsel_log_posterior(model, x) - base_vs) - (toy.log_pi(x) - base_toy)));
            }
            CHECK_MESSAGE(worst < 1e-8, to_string(spec.example));
        }
    }
}

TEST_CASE("six-mode data plants six local maxima") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto data = generate_varsel_data(DataRecipe::SixMode, 100, 200, seed);
        CHECK(planted_modes_are_local_maxima(data.model));
        CHECK(data.model.hyper().sigma2 == 2.0);
    }
    CHECK_THROWS_AS(generate_varsel_data(DataRecipe::SixMode, 50, 7, 1), ConfigError);
}

TEST_CASE("intermediate-SNR data has twenty signals of the stated size") {
    const auto data = generate_varsel_data(DataRecipe::IntermediateSNR, 200, 500, 17);
    const double scale = 2.0 * std::sqrt(std::log(500.0) / 200.0);
    int nonzero = 0;
    for (int j = 0; j < 500; ++j) {
        const double b = data.coefficients(j);
        if (b == 0.0) continue;
        ++nonzero;
        CHECK(j < 20);
        CHECK(std::abs(b) > 2.0 * scale);
        CHECK(std::abs(b) < 3.0 * scale);
    }
    CHECK(nonzero == 20);
    CHECK(data.model.hyper().g == doctest::Approx(250000.0));
    CHECK(data.model.hyper().sigma2 == doctest::Approx(data.model.response().squaredNorm() / 200.0));
}

TEST_CASE("design rows follow the exponential correlation") {
    const auto data = generate_varsel_data(DataRecipe::IntermediateSNR, 20000, 22, 5);
    const Eigen::MatrixXd& L = data.model.design();
    const double n = static_cast<double>(L.rows());
    for (int lag : {1, 2, 3}) {
        const double corr = L.col(5).dot(L.col(5 + lag)) / n;
        CHECK(std::abs(corr - std::exp(-lag)) < 0.04);
    }
}

TEST_CASE("dataset generation is deterministic and round-trips through CSV") {
    const auto a = generate_varsel_data(DataRecipe::SixMode, 30, 12, 9);
    const auto b = generate_varsel_data(DataRecipe::SixMode, 30, 12, 9);
    const auto c = generate_varsel_data(DataRecipe::SixMode, 30, 12, 10);
    CHECK(a.model.design() == b.model.design());
    CHECK(a.model.response() == b.model.response());
    CHECK(a.model.design() != c.model.design());

    const auto dir = std::filesystem::temp_directory_path() / "iit_dataset_roundtrip";
    std::filesystem::remove_all(dir);
    export_dataset(a, dir);
    const auto back = import_dataset(dir);
    CHECK(back.seed == 9);
    CHECK(back.recipe == DataRecipe::SixMode);
    CHECK(back.model.design() == a.model.design());
    CHECK(back.model.response() == a.model.response());
    CHECK(back.model.hyper().g == a.model.hyper().g);
    CHECK(back.model.hyper().sigma2 == a.model.hyper().sigma2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("geometric ABC estimator is unbiased for pi up to a constant") {
    const GeomABCSpec spec;
    Rng rng(123);
    for (int x : {1, 2, 3, 5}) {
        constexpr int draws = 200000;
        double sum = 0.0, sum2 = 0.0;
        for (int k = 0; k < draws; ++k) {
            const LogWeight w = abc_log_pi_estimate(spec, x, rng);
            const double v = w.is_zero() ? 0.0 : std::exp(w.log());
            sum += v;
            sum2 += v * v;
        }
        const double m = sum / draws;
        const double se = std::sqrt((sum2 / draws - m * m) / draws);
        const double expected = (1.0 - spec.a) * std::pow(spec.a, x - 1) * std::pow(spec.b, x);
        CHECK(std::abs(m - expected) < 4.0 * se + 1e-15);
    }
}

TEST_CASE("geometric ABC target closed forms") {
    const GeomABCTarget target({});
    CHECK(target.posterior_mean() == doctest::Approx(1.25));
    CHECK(1.0 - target.nonzero_neighbor_probability(1) == doctest::Approx(std::pow(0.84, 100)).epsilon(1e-10));
    CHECK(target.nonzero_neighbor_probability(1) < 1.0);
    CHECK(target.neighbor_count(State{1}) == 1);
    CHECK(target.neighbor(State{1}, 0) == State{2});
    CHECK(target.neighbor_count(State{4}) == 2);
    // Exact log pi is geometric with ratio ab.
    CHECK(target.log_pi(State{3}) - target.log_pi(State{2}) == doctest::Approx(std::log(0.2)));

    Rng rng(5);
    const GeomABCSpec big{0.5, 0.4, 1000000};
    const LogWeight w = abc_log_pi_estimate(big, 2, rng);
    CHECK(std::abs(w.log() - std::log(0.5 * 0.5 * 0.16)) < 1e-2);

    Rng zero_rng(1);
    int zeros = 0;
    for (int k = 0; k < 200; ++k) zeros += abc_log_pi_estimate(GeomABCSpec{}, 15, zero_rng).is_zero();
    CHECK(zeros > 150);
    CHECK_THROWS_AS(GeomABCTarget({1.5, 0.4, 100}), ConfigError);
}

TEST_CASE("gaussian target") {
    GaussianSpec spec;
    spec.p = 4;
    const GaussianTarget target(spec);
    CHECK(target.log_pi(Point(4, 0.0)) == 0.0);
    CHECK(gaussian_log_pdf(spec, {1.0, 1.0, 0.0, 0.0}) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(target.log_pi(Point(3, 0.0)), std::invalid_argument);
    CHECK(GaussianSpec::default_sigma(10) == doctest::Approx(std::sqrt(2.7 / std::pow(10.0, 0.75))));

    const GaussianRandomWalk walk(0.3);
    const Point x = {0.1, -0.2, 0.3, 0.0}, y = {0.4, 0.1, -0.2, 0.5};
    CHECK(walk.log_density(y, x) == doctest::Approx(walk.log_density(x, y)));
    // With a symmetric kernel the balancing ratio depends on the squared norms only.
    const double ratio = target.log_pi(y) - target.log_pi(x);
    double nx = 0.0, ny = 0.0;
    for (std::size_t i = 0; i < 4; ++i) nx += x[i] * x[i], ny += y[i] * y[i];
    CHECK(ratio == doctest::Approx(-(ny - nx) / 2.0));
}
