#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "iit/balancing.hpp"
#include "iit/continuous.hpp"
#include "iit/log_math.hpp"
#include "iit/random.hpp"
#include "iit/target.hpp"

namespace iit {

enum class Algorithm { NaiveIIT, MHIIT, RNIIT, CTIIT, VTIIT, PIIT, PMH, MTIT, UninformedMH };

std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& text);

// Probability rho(x) of taking the informed branch in MH-IIT.
struct RhoMode {
    enum class Kind { Constant, AOverN };
    Kind kind = Kind::Constant;
    double value = 0.025;  // rho for Constant, A for AOverN

    static RhoMode constant(double rho) { return {Kind::Constant, rho}; }
    static RhoMode a_over_n(double a) { return {Kind::AOverN, a}; }
    double at(std::size_t neighbor_count) const;
    std::string describe() const;
};

enum class LadderMethod { M1, M2, M3 };

std::string to_string(LadderMethod method);
LadderMethod parse_ladder_method(const std::string& text);

struct LadderConfig {
    int J = 0;
    double delta = 1.0;
    LadderMethod method = LadderMethod::M1;
    BalancingFunction h_star = BalancingFunction::min_one();
    double s0 = 100.0;
    double n0 = 100.0;
    bool adapt = true;
    // Stop adapting psi after this many iterations; 0 never freezes.
    std::uint64_t freeze_after = 0;
    // Initial log psi per rung; empty means psi = 1.
    std::vector<double> initial_log_psi;

    // a_j = 1 / (1 + j delta).
    double inverse_temperature(int j) const;
    // h_j under the selected method.
    BalancingFunction rung_balancing(int j) const;
    void validate() const;
};

struct SamplerConfig {
    Algorithm algorithm = Algorithm::NaiveIIT;
    BalancingFunction h = BalancingFunction::min_one();
    std::uint64_t T = 1000;
    std::uint64_t seed = 0;
    RhoMode rho;
    std::size_t m = 2;
    double a = 1.0;
    LadderConfig ladder;
    // Stop before an iteration once this many posterior calls are spent; 0 is unlimited.
    std::uint64_t max_calls = 0;
    // P-IIT on the ABC target: multiply weights by 1 / B(x).
    bool abc_correction = false;

    void validate() const;
};

// One emitted sample. `aux` is the temperature index for VT-IIT, a subset fingerprint for
// RN-IIT and -1 otherwise.
struct SampleView {
    const State& state;
    LogWeight log_weight;
    std::uint64_t calls;
    std::int64_t aux;
};

// Receives each sample; returning false stops the run.
using SampleSink = std::function<bool(const SampleView&)>;

struct RunStats {
    std::uint64_t samples = 0;
    std::uint64_t calls = 0;
    std::uint64_t redraws = 0;
    bool stopped_early = false;
};

class WeightedSampleStream {
public:
    void push(const SampleView& sample);
    std::size_t size() const { return states_.size(); }
    bool empty() const { return states_.empty(); }

    const std::vector<State>& states() const { return states_; }
    const std::vector<LogWeight>& log_weights() const { return log_weights_; }
    const std::vector<std::uint64_t>& calls() const { return calls_; }
    const std::vector<std::int64_t>& aux() const { return aux_; }
    std::uint64_t total_calls() const { return calls_.empty() ? 0 : calls_.back(); }

    RunStats stats;

private:
    std::vector<State> states_;
    std::vector<LogWeight> log_weights_;
    std::vector<std::uint64_t> calls_;
    std::vector<std::int64_t> aux_;
};

// Every discrete sampler emits T + 1 samples x(0..T) unless stopped by the sink or max_calls.
RunStats run_naive_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0,
                       const SampleSink& sink);
RunStats run_mh_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0,
                    const SampleSink& sink);
RunStats run_rn_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0,
                    const SampleSink& sink);
RunStats run_ct_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0,
                    const SampleSink& sink);
RunStats run_vt_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0,
                    const SampleSink& sink);
RunStats run_uninformed_mh(const DiscreteTarget& target, const SamplerConfig& config, const State& x0,
                           const SampleSink& sink);
RunStats run_p_iit(const PseudoMarginalTarget& target, const SamplerConfig& config, const State& x0,
                   const SampleSink& sink);
// Pseudo-marginal uninformed MH in sojourn form.
RunStats run_p_mh(const PseudoMarginalTarget& target, const SamplerConfig& config, const State& x0,
                  const SampleSink& sink);

// Dispatch on config.algorithm (MTIT excluded); P-IIT and P-MH need a pseudo-marginal target.
RunStats run_sampler(const DiscreteTarget& target, const SamplerConfig& config, const State& x0,
                     const SampleSink& sink);
WeightedSampleStream run_sampler(const DiscreteTarget& target, const SamplerConfig& config, const State& x0);

WeightedSampleStream run_naive_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0);
WeightedSampleStream run_mh_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0);
WeightedSampleStream run_rn_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0);
WeightedSampleStream run_ct_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0);
WeightedSampleStream run_vt_iit(const DiscreteTarget& target, const SamplerConfig& config, const State& x0);
WeightedSampleStream run_uninformed_mh(const DiscreteTarget& target, const SamplerConfig& config, const State& x0);
WeightedSampleStream run_p_iit(const PseudoMarginalTarget& target, const SamplerConfig& config, const State& x0);
WeightedSampleStream run_p_mh(const PseudoMarginalTarget& target, const SamplerConfig& config, const State& x0);

// One draw of Algorithm A at x: weight W with E[W] = 1/Z_h(x), the next state and its calls.
struct WeightDraw {
    double log_w = 0.0;
    std::size_t next_index = 0;
    double next_log_pi = 0.0;
    std::uint64_t calls = 0;
};

WeightDraw estimate_weight_mh(const DiscreteTarget& target, const BalancingFunction& h, const State& x,
                              double log_pi_x, double rho, Rng& rng);
WeightDraw estimate_weight_mh(const DiscreteTarget& target, const BalancingFunction& h, const State& x, double rho,
                              Rng& rng);

// Continuous-space sample emitted by MT-IT.
struct PointView {
    const Point& point;
    LogWeight log_weight;
    std::uint64_t calls;
};

using PointSink = std::function<bool(const PointView&)>;

RunStats run_mt_it(const GeneralTarget& target, const ProposalKernel& kernel, const SamplerConfig& config,
                   const Point& x0, const PointSink& sink);

}  // namespace iit
