#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "iit/balancing.hpp"
#include "iit/samplers.hpp"
#include "iit/target.hpp"

namespace iit {

inline constexpr std::size_t kExactCapacity = 4096;

// Exhaustive description of the informed chain P_h on a small connected state space.
struct ExactModel {
    std::vector<State> states;
    std::vector<double> log_pi;                       // un-normalized
    std::vector<std::vector<std::size_t>> neighbors;  // state indices in neighbor order
    Eigen::VectorXd pi;                               // normalized target
    Eigen::MatrixXd P;                                // P_h(x, y) = eta_h(y | x) / Z_h(x)
    Eigen::VectorXd Z;                                // Z_h
    Eigen::VectorXd pi_h;                             // pi Z_h / pi(Z_h)
    Eigen::MatrixXd P_ct;                             // P_h Z_h / pi(Z_h) off the diagonal, rows sum to 0
    double pi_Z = 0.0;                                // pi(Z_h)
    BalancingFunction h;

    std::size_t size() const { return states.size(); }
    std::size_t index_of(const State& x) const;

    std::unordered_map<State, std::size_t, StateHash> index;
};

struct ModelResiduals {
    double row_sum = 0.0;        // max |sum_y P(x, y) - 1|
    double rate_row_sum = 0.0;   // max |sum_y P_ct(x, y)|
    double detailed_balance = 0.0;  // max |pi_h(x) P(x, y) - pi_h(y) P(y, x)|
    double stationarity = 0.0;   // max |(pi_h P - pi_h)(y)|
};

// Enumerates every state reachable from `start`; throws CapacityError past `capacity` states and
// ContractViolation if a structural identity fails beyond 1e-10.
ExactModel build_exact_model(const DiscreteTarget& target, const BalancingFunction& h, const State& start,
                             std::size_t capacity = kExactCapacity);

ModelResiduals residuals(const ExactModel& model);

enum class GapKind { Discrete, Rate };

// Gap of a matrix reversible with respect to `stationary`: 1 - lambda_2 for a transition matrix,
// -lambda_2 for a rate matrix. Throws ContractViolation when the symmetrized form is not symmetric.
double spectral_gap(const Eigen::MatrixXd& matrix, const Eigen::VectorXd& stationary, GapKind kind);
// Gap(P_h) under pi_h.
double discrete_gap(const ExactModel& model);
// Gap(P_ct) under pi.
double rate_gap(const ExactModel& model);

// E[K(x)] of the mixed weight estimator: (rho (|N_x| - 1) + 1) / (rho (1 - Z) + Z).
double expected_cost(double Z, std::size_t neighbor_count, double rho);
// kappa_{h, rho} = sum pi_h(x) E[K(x)].
double average_cost(const ExactModel& model, std::span<const double> rho);
// Comp(h, rho) = kappa_{h, rho} / Gap(P_ct).
double complexity_estimate(const ExactModel& model, std::span<const double> rho);
double complexity_estimate(const ExactModel& model, double rho);

// Mean and normalized variance of an importance-weight kernel R over the states of a model.
struct WeightKernelSpec {
    Eigen::VectorXd m_R;  // E[W | x]
    Eigen::VectorXd v_R;  // Var(W | x) / pi_tilde(m_R)^2
};

// Kernel of the mixed estimator at per-state rho: m = 1/Z, variance from the closed form.
WeightKernelSpec mixed_weight_kernel(const ExactModel& model, std::span<const double> rho);
// Exponential weights with mean 1/Z.
WeightKernelSpec exponential_weight_kernel(const ExactModel& model);

// Asymptotic variance of sqrt(T) f_hat_T for an importance tempering scheme (P_tilde, R) with
// target pi; f must be centered under pi.
double asymptotic_variance_oracle(const Eigen::MatrixXd& P_tilde, const Eigen::VectorXd& pi_tilde,
                                  const Eigen::VectorXd& pi, const WeightKernelSpec& weights,
                                  const Eigen::VectorXd& f);
double asymptotic_variance_oracle(const ExactModel& model, const WeightKernelSpec& weights, const Eigen::VectorXd& f);

// f - pi(f).
Eigen::VectorXd center(const ExactModel& model, const Eigen::VectorXd& f);

// Finite-support weight law per state: (value, probability) atoms.
using DiscreteWeightLaw = std::vector<std::vector<std::pair<double, double>>>;

WeightKernelSpec moments(const DiscreteWeightLaw& law, const Eigen::VectorXd& pi_tilde);

// Asymptotic variance computed directly on the bivariate chain (X, W) with kernel
// P_tilde(x, x') R(x', w'), without the Dirac-plus-variance decomposition.
double joint_chain_variance(const Eigen::MatrixXd& P_tilde, const Eigen::VectorXd& pi_tilde,
                            const DiscreteWeightLaw& law, const Eigen::VectorXd& f);

struct AppendixAEntry {
    double rho = 0.0;
    double sigma2 = 0.0;
    double prop1_bound = 0.0;  // 2 (gamma + pi_h(f^2 v)) / Gap(P_h)
};

struct AppendixAReport {
    std::vector<AppendixAEntry> entries;
    double sigma2_exact = 0.0;  // rho = 1
    double sigma2_mh = 0.0;     // rho = 0
    double gamma = 0.0;         // pi(Z_h) pi(f^2 / Z_h)
    double gap = 0.0;           // Gap(P_h)
    double gap_ct = 0.0;        // Gap(P_ct)
    double ct_bound = 0.0;      // 2 pi(f^2) / Gap(P_ct)
    bool chain_holds = false;   // sigma2_1 <= sigma2_rho <= sigma2_0 <= sigma2_1 + gamma
    bool prop1_holds = false;
    bool ct_bound_holds = false;

    bool passed() const { return chain_holds && prop1_holds && ct_bound_holds; }
};

// Evaluates the variance ordering and both variance bounds for the mixed estimator on a grid of
// constant rho values; f must be centered under pi.
AppendixAReport verify_appendix_a(const ExactModel& model, const Eigen::VectorXd& f, std::span<const double> rho_grid);

// Exact chain of the varying-temperature sampler with frozen psi on states (x, j).
struct TemperedJointModel {
    std::vector<std::size_t> state_of;  // base-model index per joint state
    std::vector<int> rung_of;
    Eigen::MatrixXd P;
    Eigen::VectorXd Z;
    std::vector<double> inverse_temperatures;
    std::vector<double> log_psi;
    std::vector<double> base_log_pi;
};

TemperedJointModel build_tempered_joint_model(const DiscreteTarget& target, const LadderConfig& ladder,
                                              std::span<const double> log_psi, const State& start,
                                              std::size_t capacity = kExactCapacity);

// max |mu(u) P(u, v) - mu(v) P(v, u)| for mu ∝ pi^{a_j} psi_j Z(x, j) normalized.
double joint_reversibility_residual(const TemperedJointModel& model, std::span<const double> log_psi);

struct StationarityReport {
    double residual = 0.0;
    // Residual after moving log psi of the top rung by `perturbation` without rebuilding the chain.
    double perturbed_residual = 0.0;
    bool passed = false;
};

StationarityReport verify_vtiit_stationarity(const DiscreteTarget& target, const LadderConfig& ladder,
                                             const State& start, double perturbation = 0.5);

struct RandomNeighborhoodCheck {
    std::vector<double> conditional_weight;  // E[w | x] under the joint stationary law
    std::vector<double> inverse_Z;           // 1 / Z_h(x)
    double max_error = 0.0;
};

// Enumerates the random-neighborhood chain on (x, S), solves for its stationary law and compares
// E[m / (|N_x| Z_h(x, S)) | x] with 1 / Z_h(x).
RandomNeighborhoodCheck verify_random_neighborhood_weights(const DiscreteTarget& target, const BalancingFunction& h,
                                                           std::size_t m, const State& start);

struct MultipleTryCheck {
    double stationarity = 0.0;    // max |(mu P - mu)(u)| for mu ∝ pi(x) Z~(x, S) prod q(y | x)
    double reversibility = 0.0;   // max |mu(u) P(u, v) - mu(v) P(v, u)|
    double marginal = 0.0;        // max |sum_S mu(x, S) / Z~(x, S) - pi(x)| after normalization
    double row_sum = 0.0;
};

// Multiple-try scheme on a finite space with candidate tuples of length m; the returning state is
// inserted at a uniform position, which gives the same chain on candidate multisets.
MultipleTryCheck verify_multiple_try(std::span<const double> log_pi, const Eigen::MatrixXd& q,
                                     const BalancingFunction& h, std::size_t m);

// One row of the complexity grid over HC(c).
struct ComplexityRow {
    double theta = 0.0;
    double c = 0.0;
    double gap = 0.0;  // Gap(P_ct)
    double comp_rho0 = 0.0;
    double comp_rho1 = 0.0;
    double comp_rho_half = 0.0;
};

struct GridOptimum {
    double value = 0.0;
    double c = 0.0;
};

struct ComplexityOptima {
    double theta = 0.0;
    GridOptimum max_gap;
    GridOptimum min_comp_rho0;
    GridOptimum min_comp_rho1;
    GridOptimum min_comp_rho_half;
};

// Toy2 with dimension p at theta, h = HC(c) for c = c_min, c_min + step, ..., c_max.
std::vector<ComplexityRow> complexity_grid(int p, double theta, double c_min = 0.0, double c_max = 6.0,
                                           double step = 0.01);
// First grid point attaining each extremum.
ComplexityOptima grid_optima(std::span<const ComplexityRow> rows);

}  // namespace iit
