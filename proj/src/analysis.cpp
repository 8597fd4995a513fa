#include "iit/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>
#include <string>

#include "iit/errors.hpp"
#include "iit/log_math.hpp"
#include "iit/toys.hpp"

namespace iit {

namespace {

constexpr double kIdentityTolerance = 1e-10;
constexpr double kRowTolerance = 1e-12;

struct Enumeration {
    std::vector<State> states;
    std::vector<double> log_pi;
    std::vector<std::vector<std::size_t>> neighbors;
    std::unordered_map<State, std::size_t, StateHash> index;
};

Enumeration enumerate(const DiscreteTarget& target, const State& start, std::size_t capacity) {
    Enumeration e;
    const auto add = [&](const State& x) {
        const auto [it, inserted] = e.index.emplace(x, e.states.size());
        if (inserted) {
            if (e.states.size() >= capacity)
                throw CapacityError("state space exceeds " + std::to_string(capacity) + " states");
            e.states.push_back(x);
        }
        return it->second;
    };
    add(start);
    for (std::size_t k = 0; k < e.states.size(); ++k) {
        const State x = e.states[k];
        const std::size_t n = target.neighbor_count(x);
        if (n == 0) throw ContractViolation("state without neighbors");
        std::vector<std::size_t> adj(n);
        for (std::size_t i = 0; i < n; ++i) adj[i] = add(target.neighbor(x, i));
        e.neighbors.push_back(std::move(adj));
    }
    e.log_pi.reserve(e.states.size());
    for (const State& x : e.states) e.log_pi.push_back(target.log_pi(x));
    return e;
}

// log eta_h(y | x) = -log|N_x| + log h(a (log pi(y) - log pi(x)) + log|N_x| - log|N_y|).
double local_log_eta(const BalancingFunction& h, double a, double lpx, double lpy, std::size_t nx, std::size_t ny) {
    const double log_nx = std::log(static_cast<double>(nx));
    return -log_nx + h.log_apply(a * (lpy - lpx) + log_nx - std::log(static_cast<double>(ny)));
}

Eigen::VectorXd normalized_exp(const std::vector<double>& log_values) {
    const double lse = log_sum_exp(log_values);
    Eigen::VectorXd out(static_cast<Eigen::Index>(log_values.size()));
    for (std::size_t i = 0; i < log_values.size(); ++i) out(static_cast<Eigen::Index>(i)) = std::exp(log_values[i] - lse);
    return out;
}

double balance_residual(const Eigen::VectorXd& mu, const Eigen::MatrixXd& P) {
    const Eigen::MatrixXd flow = mu.asDiagonal() * P;
    return (flow - flow.transpose()).cwiseAbs().maxCoeff();
}

// Solution of (I - P + 1 mu^T) x = g, the centered Poisson solution when mu(g) = 0.
Eigen::VectorXd poisson_solution(const Eigen::MatrixXd& P, const Eigen::VectorXd& mu, const Eigen::VectorXd& g) {
    const auto n = P.rows();
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - P;
    A.rowwise() += mu.transpose();
    return A.partialPivLu().solve(g);
}

Eigen::VectorXd stationary_law(const Eigen::MatrixXd& P) {
    const auto n = P.rows();
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - P.transpose();
    A.array() += 1.0;
    return A.partialPivLu().solve(Eigen::VectorXd::Ones(n));
}

double binomial(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

void require_centered(const Eigen::VectorXd& pi, const Eigen::VectorXd& f) {
    const double mean = pi.dot(f);
    const double scale = std::max(1.0, pi.dot(f.cwiseAbs()));
    if (std::abs(mean) > kIdentityTolerance * scale) throw ContractViolation("function is not centered under pi");
}

}  // namespace

std::size_t ExactModel::index_of(const State& x) const {
    const auto it = index.find(x);
    if (it == index.end()) throw std::out_of_range("state is not part of the model");
    return it->second;
}

ExactModel build_exact_model(const DiscreteTarget& target, const BalancingFunction& h, const State& start,
                             std::size_t capacity) {
    Enumeration e = enumerate(target, start, capacity);
    const auto n = static_cast<Eigen::Index>(e.states.size());
    ExactModel model;
    model.h = h;
    model.pi = normalized_exp(e.log_pi);
    model.P = Eigen::MatrixXd::Zero(n, n);
    model.Z = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index x = 0; x < n; ++x) {
        const auto& adj = e.neighbors[static_cast<std::size_t>(x)];
        for (std::size_t y : adj) {
            const double le = local_log_eta(h, 1.0, e.log_pi[static_cast<std::size_t>(x)], e.log_pi[y], adj.size(),
                                            e.neighbors[y].size());
            eta(x, static_cast<Eigen::Index>(y)) += std::exp(le);
        }
        model.Z(x) = eta.row(x).sum();
        model.P.row(x) = eta.row(x) / model.Z(x);
    }
    model.pi_Z = model.pi.dot(model.Z);
    model.pi_h = model.pi.cwiseProduct(model.Z) / model.pi_Z;
    model.P_ct = eta / model.pi_Z;
    for (Eigen::Index x = 0; x < n; ++x) {
        model.P_ct(x, x) = 0.0;
        model.P_ct(x, x) = -model.P_ct.row(x).sum();
    }
    model.states = std::move(e.states);
    model.log_pi = std::move(e.log_pi);
    model.neighbors = std::move(e.neighbors);
    model.index = std::move(e.index);

    const ModelResiduals r = residuals(model);
    if (r.row_sum > kRowTolerance || r.rate_row_sum > kRowTolerance * std::max(1.0, model.P_ct.cwiseAbs().maxCoeff()))
        throw ContractViolation("transition rows do not sum correctly");
    if (r.detailed_balance > kIdentityTolerance) throw ContractViolation("P_h is not reversible with respect to pi_h");
    if (r.stationarity > kIdentityTolerance) throw ContractViolation("pi_h is not stationary for P_h");
    return model;
}

ModelResiduals residuals(const ExactModel& model) {
    ModelResiduals r;
    r.row_sum = (model.P.rowwise().sum().array() - 1.0).abs().maxCoeff();
    r.rate_row_sum = model.P_ct.rowwise().sum().cwiseAbs().maxCoeff();
    r.detailed_balance = balance_residual(model.pi_h, model.P);
    r.stationarity = (model.P.transpose() * model.pi_h - model.pi_h).cwiseAbs().maxCoeff();
    return r;
}

double spectral_gap(const Eigen::MatrixXd& matrix, const Eigen::VectorXd& stationary, GapKind kind) {
    const auto n = matrix.rows();
    if (n < 2 || matrix.cols() != n || stationary.size() != n) throw ContractViolation("gap needs a square matrix of size >= 2");
    if ((stationary.array() <= 0.0).any()) throw ContractViolation("stationary law must be positive");
    const Eigen::VectorXd root = stationary.cwiseSqrt();
    const Eigen::MatrixXd S = root.asDiagonal() * matrix * root.cwiseInverse().asDiagonal();
    const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > kIdentityTolerance * scale)
        throw ContractViolation("matrix is not reversible with respect to the given law");
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
    const double lambda2 = solver.eigenvalues()(n - 2);
    return kind == GapKind::Discrete ? 1.0 - lambda2 : -lambda2;
}

double discrete_gap(const ExactModel& model) { return spectral_gap(model.P, model.pi_h, GapKind::Discrete); }

double rate_gap(const ExactModel& model) { return spectral_gap(model.P_ct, model.pi, GapKind::Rate); }

double expected_cost(double Z, std::size_t neighbor_count, double rho) {
    return (rho * (static_cast<double>(neighbor_count) - 1.0) + 1.0) / (rho * (1.0 - Z) + Z);
}

double average_cost(const ExactModel& model, std::span<const double> rho) {
    if (rho.size() != model.size()) throw std::invalid_argument("rho must have one entry per state");
    double kappa = 0.0;
    for (std::size_t x = 0; x < model.size(); ++x) {
        if (!(rho[x] >= 0.0 && rho[x] <= 1.0)) throw ContractViolation("rho must lie in [0, 1]");
        const auto i = static_cast<Eigen::Index>(x);
        kappa += model.pi_h(i) * expected_cost(model.Z(i), model.neighbors[x].size(), rho[x]);
    }
    return kappa;
}

double complexity_estimate(const ExactModel& model, std::span<const double> rho) {
    return average_cost(model, rho) / rate_gap(model);
}

double complexity_estimate(const ExactModel& model, double rho) {
    const std::vector<double> per_state(model.size(), rho);
    return complexity_estimate(model, per_state);
}

WeightKernelSpec mixed_weight_kernel(const ExactModel& model, std::span<const double> rho) {
    if (rho.size() != model.size()) throw std::invalid_argument("rho must have one entry per state");
    const auto n = static_cast<Eigen::Index>(model.size());
    WeightKernelSpec k{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index x = 0; x < n; ++x) {
        const double Z = model.Z(x);
        if (Z > 1.0 + kIdentityTolerance) throw ContractViolation("mixed weights need Z_h <= 1");
        const double r = rho[static_cast<std::size_t>(x)];
        const double miss = std::max(0.0, 1.0 - Z);
        k.m_R(x) = 1.0 / Z;
        k.v_R(x) = model.pi_Z * model.pi_Z * miss * (1.0 - r) / (Z * Z + r * Z * miss);
    }
    return k;
}

WeightKernelSpec exponential_weight_kernel(const ExactModel& model) {
    WeightKernelSpec k{model.Z.cwiseInverse(), Eigen::VectorXd()};
    k.v_R = (model.pi_Z * k.m_R).array().square().matrix();
    return k;
}

double asymptotic_variance_oracle(const Eigen::MatrixXd& P_tilde, const Eigen::VectorXd& pi_tilde,
                                  const Eigen::VectorXd& pi, const WeightKernelSpec& weights,
                                  const Eigen::VectorXd& f) {
    const auto n = P_tilde.rows();
    if (pi_tilde.size() != n || pi.size() != n || f.size() != n || weights.m_R.size() != n || weights.v_R.size() != n)
        throw std::invalid_argument("oracle inputs differ in size");
    require_centered(pi, f);
    if ((weights.m_R.array() <= 0.0).any() || (weights.v_R.array() < 0.0).any())
        throw ContractViolation("weight kernel needs m_R > 0 and v_R >= 0");
    const double c = pi_tilde.dot(weights.m_R);
    const Eigen::ArrayXd ratio = weights.m_R.array() * pi_tilde.array() / pi.array() / c;
    if ((ratio - 1.0).abs().maxCoeff() > kIdentityTolerance)
        throw ContractViolation("weight means are not proportional to pi / pi_tilde");
    const Eigen::VectorXd g = f.cwiseProduct(weights.m_R) / c;
    const Eigen::VectorXd g_hat = poisson_solution(P_tilde, pi_tilde, g);
    const double dirac = 2.0 * pi_tilde.dot(g.cwiseProduct(g_hat)) - pi_tilde.dot(g.cwiseProduct(g));
    return dirac + pi_tilde.dot(f.cwiseProduct(f).cwiseProduct(weights.v_R));
}

double asymptotic_variance_oracle(const ExactModel& model, const WeightKernelSpec& weights, const Eigen::VectorXd& f) {
    return asymptotic_variance_oracle(model.P, model.pi_h, model.pi, weights, f);
}

Eigen::VectorXd center(const ExactModel& model, const Eigen::VectorXd& f) {
    return (f.array() - model.pi.dot(f)).matrix();
}

WeightKernelSpec moments(const DiscreteWeightLaw& law, const Eigen::VectorXd& pi_tilde) {
    const auto n = static_cast<Eigen::Index>(law.size());
    if (pi_tilde.size() != n) throw std::invalid_argument("weight law and pi_tilde differ in size");
    WeightKernelSpec k{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index x = 0; x < n; ++x) {
        double mean = 0.0, total = 0.0;
        for (const auto& [w, p] : law[static_cast<std::size_t>(x)]) {
            mean += w * p;
            total += p;
        }
        if (std::abs(total - 1.0) > kRowTolerance) throw ContractViolation("weight law does not sum to 1");
        double var = 0.0;
        for (const auto& [w, p] : law[static_cast<std::size_t>(x)]) var += (w - mean) * (w - mean) * p;
        k.m_R(x) = mean;
        k.v_R(x) = var;
    }
    const double c = pi_tilde.dot(k.m_R);
    k.v_R /= c * c;
    return k;
}

double joint_chain_variance(const Eigen::MatrixXd& P_tilde, const Eigen::VectorXd& pi_tilde,
                            const DiscreteWeightLaw& law, const Eigen::VectorXd& f) {
    const auto n = P_tilde.rows();
    if (static_cast<Eigen::Index>(law.size()) != n || pi_tilde.size() != n || f.size() != n)
        throw std::invalid_argument("joint chain inputs differ in size");
    std::vector<Eigen::Index> offset(law.size() + 1, 0);
    for (std::size_t x = 0; x < law.size(); ++x)
        offset[x + 1] = offset[x] + static_cast<Eigen::Index>(law[x].size());
    const Eigen::Index N = offset.back();
    double c = 0.0;
    for (std::size_t x = 0; x < law.size(); ++x)
        for (const auto& [w, p] : law[x]) c += pi_tilde(static_cast<Eigen::Index>(x)) * w * p;
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N, N);
    Eigen::VectorXd mu(N), F(N);
    for (std::size_t x = 0; x < law.size(); ++x) {
        const auto xi = static_cast<Eigen::Index>(x);
        for (std::size_t k = 0; k < law[x].size(); ++k) {
            const Eigen::Index u = offset[x] + static_cast<Eigen::Index>(k);
            mu(u) = pi_tilde(xi) * law[x][k].second;
            F(u) = f(xi) * law[x][k].first / c;
            for (std::size_t y = 0; y < law.size(); ++y) {
                const double move = P_tilde(xi, static_cast<Eigen::Index>(y));
                if (move == 0.0) continue;
                for (std::size_t l = 0; l < law[y].size(); ++l)
                    P(u, offset[y] + static_cast<Eigen::Index>(l)) = move * law[y][l].second;
            }
        }
    }
    if (std::abs(mu.dot(F)) > kIdentityTolerance * std::max(1.0, mu.dot(F.cwiseAbs())))
        throw ContractViolation("weighted function is not centered");
    const Eigen::VectorXd F_hat = poisson_solution(P, mu, F);
    return 2.0 * mu.dot(F.cwiseProduct(F_hat)) - mu.dot(F.cwiseProduct(F));
}

AppendixAReport verify_appendix_a(const ExactModel& model, const Eigen::VectorXd& f, std::span<const double> rho_grid) {
    require_centered(model.pi, f);
    AppendixAReport report;
    const Eigen::VectorXd f2 = f.cwiseProduct(f);
    report.gamma = model.pi_Z * model.pi.dot(f2.cwiseQuotient(model.Z));
    report.gap = discrete_gap(model);
    report.gap_ct = rate_gap(model);
    report.ct_bound = 2.0 * model.pi.dot(f2) / report.gap_ct;

    const auto sigma2_at = [&](double rho) {
        const std::vector<double> per_state(model.size(), rho);
        const WeightKernelSpec k = mixed_weight_kernel(model, per_state);
        return std::pair{asymptotic_variance_oracle(model, k, f), k};
    };
    report.sigma2_exact = sigma2_at(1.0).first;
    report.sigma2_mh = sigma2_at(0.0).first;
    const double tol = kIdentityTolerance * std::max(1.0, std::abs(report.sigma2_mh));
    report.chain_holds = report.sigma2_mh <= report.sigma2_exact + report.gamma + tol;
    report.prop1_holds = true;
    report.ct_bound_holds = true;
    for (double rho : rho_grid) {
        const auto [sigma2, kernel] = sigma2_at(rho);
        AppendixAEntry entry;
        entry.rho = rho;
        entry.sigma2 = sigma2;
        entry.prop1_bound = 2.0 * (report.gamma + model.pi_h.dot(f2.cwiseProduct(kernel.v_R))) / report.gap;
        report.chain_holds = report.chain_holds && report.sigma2_exact <= sigma2 + tol && sigma2 <= report.sigma2_mh + tol;
        report.prop1_holds = report.prop1_holds && report.gap < 1.0 && sigma2 <= entry.prop1_bound + tol;
        report.ct_bound_holds = report.ct_bound_holds && sigma2 <= report.ct_bound + tol;
        report.entries.push_back(entry);
    }
    return report;
}

TemperedJointModel build_tempered_joint_model(const DiscreteTarget& target, const LadderConfig& ladder,
                                              std::span<const double> log_psi, const State& start,
                                              std::size_t capacity) {
    ladder.validate();
    const int J = ladder.J;
    const auto rungs = static_cast<std::size_t>(J + 1);
    if (log_psi.size() != rungs) throw std::invalid_argument("log psi needs one entry per rung");
    const Enumeration e = enumerate(target, start, capacity);
    if (e.states.size() * rungs > capacity)
        throw CapacityError("joint space exceeds " + std::to_string(capacity) + " states");

    TemperedJointModel model;
    model.log_psi.assign(log_psi.begin(), log_psi.end());
    model.base_log_pi = e.log_pi;
    for (int j = 0; j <= J; ++j) model.inverse_temperatures.push_back(ladder.inverse_temperature(j));
    const auto joint = [rungs](std::size_t x, int j) { return static_cast<Eigen::Index>(x * rungs + static_cast<std::size_t>(j)); };
    const auto N = static_cast<Eigen::Index>(e.states.size() * rungs);
    const auto degree = [J](int j) { return static_cast<double>((j > 0 ? 1 : 0) + (j < J ? 1 : 0)); };
    Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(N, N);
    for (std::size_t x = 0; x < e.states.size(); ++x) {
        for (int j = 0; j <= J; ++j) {
            model.state_of.push_back(x);
            model.rung_of.push_back(j);
            const Eigen::Index u = joint(x, j);
            const BalancingFunction hj = ladder.rung_balancing(j);
            const double a = model.inverse_temperatures[static_cast<std::size_t>(j)];
            for (std::size_t y : e.neighbors[x])
                eta(u, joint(y, j)) +=
                    std::exp(local_log_eta(hj, a, e.log_pi[x], e.log_pi[y], e.neighbors[x].size(), e.neighbors[y].size()));
            for (int l : {j - 1, j + 1}) {
                if (l < 0 || l > J) continue;
                const double al = model.inverse_temperatures[static_cast<std::size_t>(l)];
                const double q_out = 1.0 / degree(j);
                const double q_back = 1.0 / degree(l);
                const double log_ratio = (al - a) * e.log_pi[x] + log_psi[static_cast<std::size_t>(l)] -
                                         log_psi[static_cast<std::size_t>(j)] + std::log(q_back / q_out);
                eta(u, joint(x, l)) += q_out * std::exp(ladder.h_star.log_apply(log_ratio));
            }
        }
    }
    model.Z = eta.rowwise().sum();
    model.P = model.Z.cwiseInverse().asDiagonal() * eta;
    return model;
}

double joint_reversibility_residual(const TemperedJointModel& model, std::span<const double> log_psi) {
    if (log_psi.size() != model.log_psi.size()) throw std::invalid_argument("log psi needs one entry per rung");
    std::vector<double> log_mu(model.state_of.size());
    for (std::size_t u = 0; u < log_mu.size(); ++u) {
        const auto j = static_cast<std::size_t>(model.rung_of[u]);
        log_mu[u] = model.inverse_temperatures[j] * model.base_log_pi[model.state_of[u]] + log_psi[j] +
                    std::log(model.Z(static_cast<Eigen::Index>(u)));
    }
    return balance_residual(normalized_exp(log_mu), model.P);
}

StationarityReport verify_vtiit_stationarity(const DiscreteTarget& target, const LadderConfig& ladder,
                                             const State& start, double perturbation) {
    std::vector<double> log_psi = ladder.initial_log_psi.empty()
                                      ? std::vector<double>(static_cast<std::size_t>(ladder.J + 1), 0.0)
                                      : ladder.initial_log_psi;
    const TemperedJointModel model = build_tempered_joint_model(target, ladder, log_psi, start);
    StationarityReport report;
    report.residual = joint_reversibility_residual(model, log_psi);
    log_psi.back() += perturbation;
    report.perturbed_residual = joint_reversibility_residual(model, log_psi);
    report.passed = report.residual < kIdentityTolerance;
    return report;
}

RandomNeighborhoodCheck verify_random_neighborhood_weights(const DiscreteTarget& target, const BalancingFunction& h,
                                                           std::size_t m, const State& start) {
    const Enumeration e = enumerate(target, start, kExactCapacity);
    const std::size_t n = e.states.size();
    for (const auto& adj : e.neighbors) {
        if (adj.size() > 63) throw CapacityError("neighborhoods above 63 states are not enumerated");
        if (m < 2 || m > adj.size()) throw ConfigError("subset size must satisfy 2 <= m <= min |N_x|");
    }
    // Joint states: (x, subset of neighbor positions as a bitmask).
    std::map<std::pair<std::size_t, std::uint64_t>, Eigen::Index> joint;
    std::vector<std::pair<std::size_t, std::uint64_t>> keys;
    for (std::size_t x = 0; x < n; ++x) {
        const std::size_t deg = e.neighbors[x].size();
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << deg); ++mask) {
            if (static_cast<std::size_t>(std::popcount(mask)) != m) continue;
            joint.emplace(std::pair{x, mask}, static_cast<Eigen::Index>(keys.size()));
            keys.emplace_back(x, mask);
            if (keys.size() > kExactCapacity) throw CapacityError("joint space exceeds the exact capacity");
        }
    }
    std::vector<std::vector<double>> eta(n);
    std::vector<double> Z(n, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y : e.neighbors[x]) {
            eta[x].push_back(std::exp(local_log_eta(h, 1.0, e.log_pi[x], e.log_pi[y], e.neighbors[x].size(),
                                                    e.neighbors[y].size())));
            Z[x] += eta[x].back();
        }
    }
    const auto N = static_cast<Eigen::Index>(keys.size());
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N, N);
    std::vector<double> subset_Z(keys.size(), 0.0);
    for (Eigen::Index u = 0; u < N; ++u) {
        const auto [x, mask] = keys[static_cast<std::size_t>(u)];
        double zs = 0.0;
        for (std::size_t i = 0; i < e.neighbors[x].size(); ++i)
            if (mask >> i & 1U) zs += eta[x][i];
        subset_Z[static_cast<std::size_t>(u)] = zs;
        for (std::size_t i = 0; i < e.neighbors[x].size(); ++i) {
            if (!(mask >> i & 1U)) continue;
            const std::size_t y = e.neighbors[x][i];
            const auto& back = e.neighbors[y];
            const auto r = static_cast<std::size_t>(std::find(back.begin(), back.end(), x) - back.begin());
            if (r == back.size()) throw ContractViolation("neighborhood relation is not symmetric");
            const double fresh = 1.0 / binomial(back.size() - 1, m - 1);
            for (std::uint64_t next = 0; next < (std::uint64_t{1} << back.size()); ++next) {
                if (static_cast<std::size_t>(std::popcount(next)) != m || !(next >> r & 1U)) continue;
                P(u, joint.at({y, next})) += eta[x][i] / zs * fresh;
            }
        }
    }
    const Eigen::VectorXd mu = stationary_law(P);
    RandomNeighborhoodCheck check;
    std::vector<double> num(n, 0.0), den(n, 0.0);
    for (Eigen::Index u = 0; u < N; ++u) {
        const std::size_t x = keys[static_cast<std::size_t>(u)].first;
        const double w = static_cast<double>(m) / (static_cast<double>(e.neighbors[x].size()) * subset_Z[static_cast<std::size_t>(u)]);
        num[x] += mu(u) * w;
        den[x] += mu(u);
    }
    for (std::size_t x = 0; x < n; ++x) {
        check.conditional_weight.push_back(num[x] / den[x]);
        check.inverse_Z.push_back(1.0 / Z[x]);
        check.max_error = std::max(check.max_error, std::abs(check.conditional_weight.back() * Z[x] - 1.0));
    }
    return check;
}

MultipleTryCheck verify_multiple_try(std::span<const double> log_pi, const Eigen::MatrixXd& q,
                                     const BalancingFunction& h, std::size_t m) {
    const std::size_t n = log_pi.size();
    if (n < 2 || static_cast<std::size_t>(q.rows()) != n || static_cast<std::size_t>(q.cols()) != n)
        throw std::invalid_argument("proposal matrix must be n x n");
    if (m < 1) throw ConfigError("candidate count must be at least 1");
    for (std::size_t x = 0; x < n; ++x) {
        const auto xi = static_cast<Eigen::Index>(x);
        if (q(xi, xi) != 0.0 || std::abs(q.row(xi).sum() - 1.0) > kRowTolerance || (q.row(xi).array() < 0.0).any())
            throw ContractViolation("proposal rows must be distributions that never stay put");
        for (std::size_t y = 0; y < n; ++y)
            if ((q(xi, static_cast<Eigen::Index>(y)) > 0.0) != (q(static_cast<Eigen::Index>(y), xi) > 0.0))
                throw ContractViolation("proposal support must be symmetric");
    }
    double tuples = 1.0;
    for (std::size_t i = 0; i < m; ++i) tuples *= static_cast<double>(n);
    if (tuples * static_cast<double>(n) > static_cast<double>(kExactCapacity))
        throw CapacityError("candidate tuple space exceeds the exact capacity");
    const auto alpha = [&](std::size_t x, std::size_t y) {
        const auto xi = static_cast<Eigen::Index>(x);
        const auto yi = static_cast<Eigen::Index>(y);
        return std::exp(h.log_apply(log_pi[y] - log_pi[x] + std::log(q(yi, xi)) - std::log(q(xi, yi))));
    };

    // Enumerate (x, S) with every candidate in the support of Q(x, .).
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> states;
    std::map<std::pair<std::size_t, std::vector<std::size_t>>, Eigen::Index> index;
    const auto total = static_cast<std::size_t>(tuples);
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t code = 0; code < total; ++code) {
            std::vector<std::size_t> S(m);
            std::size_t rest = code;
            bool valid = true;
            for (std::size_t i = 0; i < m; ++i) {
                S[i] = rest % n;
                rest /= n;
                valid = valid && q(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(S[i])) > 0.0;
            }
            if (!valid) continue;
            index.emplace(std::pair{x, S}, static_cast<Eigen::Index>(states.size()));
            states.emplace_back(x, std::move(S));
        }
    }
    const auto N = static_cast<Eigen::Index>(states.size());
    const auto Z_tilde = [&](std::size_t x, const std::vector<std::size_t>& S) {
        double z = 0.0;
        for (std::size_t y : S) z += alpha(x, y);
        return z;
    };
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N, N);
    std::vector<double> log_mu(states.size());
    for (Eigen::Index u = 0; u < N; ++u) {
        const auto& [x, S] = states[static_cast<std::size_t>(u)];
        const double z = Z_tilde(x, S);
        log_mu[static_cast<std::size_t>(u)] = log_pi[x] + std::log(z);
        for (std::size_t y : S) log_mu[static_cast<std::size_t>(u)] += std::log(q(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)));
        for (Eigen::Index v = 0; v < N; ++v) {
            const auto& [y, T] = states[static_cast<std::size_t>(v)];
            const auto picks = static_cast<double>(std::count(S.begin(), S.end(), y));
            if (picks == 0.0) continue;
            double refresh = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                if (T[k] != x) continue;
                double prod = 1.0 / static_cast<double>(m);
                for (std::size_t l = 0; l < m; ++l)
                    if (l != k) prod *= q(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(T[l]));
                refresh += prod;
            }
            P(u, v) += picks * alpha(x, y) / z * refresh;
        }
    }
    const Eigen::VectorXd mu = normalized_exp(log_mu);
    MultipleTryCheck check;
    check.row_sum = (P.rowwise().sum().array() - 1.0).abs().maxCoeff();
    check.stationarity = (P.transpose() * mu - mu).cwiseAbs().maxCoeff();
    check.reversibility = balance_residual(mu, P);
    Eigen::VectorXd marginal = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (Eigen::Index u = 0; u < N; ++u) {
        const auto& [x, S] = states[static_cast<std::size_t>(u)];
        marginal(static_cast<Eigen::Index>(x)) += mu(u) / Z_tilde(x, S);
    }
    marginal /= marginal.sum();
    const Eigen::VectorXd pi = normalized_exp(std::vector<double>(log_pi.begin(), log_pi.end()));
    check.marginal = (marginal - pi).cwiseAbs().maxCoeff();
    return check;
}

std::vector<ComplexityRow> complexity_grid(int p, double theta, double c_min, double c_max, double step) {
    if (!(step > 0.0) || !(c_max >= c_min)) throw ConfigError("grid needs step > 0 and c_max >= c_min");
    ToySpec spec;
    spec.example = ToyExample::Toy2;
    spec.p = p;
    spec.theta = theta;
    const ToyTarget target(spec);
    const State start(static_cast<std::size_t>(p), 0);
    const auto points = static_cast<std::size_t>(std::llround((c_max - c_min) / step)) + 1;
    std::vector<ComplexityRow> rows;
    rows.reserve(points);
    for (std::size_t k = 0; k < points; ++k) {
        ComplexityRow row;
        row.theta = theta;
        row.c = c_min + static_cast<double>(k) * step;
        const ExactModel model = build_exact_model(target, BalancingFunction::hc(row.c), start);
        row.gap = rate_gap(model);
        row.comp_rho0 = average_cost(model, std::vector<double>(model.size(), 0.0)) / row.gap;
        row.comp_rho1 = average_cost(model, std::vector<double>(model.size(), 1.0)) / row.gap;
        row.comp_rho_half = average_cost(model, std::vector<double>(model.size(), 0.5)) / row.gap;
        rows.push_back(row);
    }
    return rows;
}

ComplexityOptima grid_optima(std::span<const ComplexityRow> rows) {
    if (rows.empty()) throw std::invalid_argument("empty complexity grid");
    ComplexityOptima o;
    o.theta = rows.front().theta;
    o.max_gap = {rows.front().gap, rows.front().c};
    o.min_comp_rho0 = {rows.front().comp_rho0, rows.front().c};
    o.min_comp_rho1 = {rows.front().comp_rho1, rows.front().c};
    o.min_comp_rho_half = {rows.front().comp_rho_half, rows.front().c};
    for (const ComplexityRow& r : rows) {
        if (r.gap > o.max_gap.value) o.max_gap = {r.gap, r.c};
        if (r.comp_rho0 < o.min_comp_rho0.value) o.min_comp_rho0 = {r.comp_rho0, r.c};
        if (r.comp_rho1 < o.min_comp_rho1.value) o.min_comp_rho1 = {r.comp_rho1, r.c};
        if (r.comp_rho_half < o.min_comp_rho_half.value) o.min_comp_rho_half = {r.comp_rho_half, r.c};
    }
    return o;
}

}  // namespace iit
