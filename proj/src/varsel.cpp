#include "iit/varsel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "iit/errors.hpp"
#include "iit/toys.hpp"

namespace iit {

namespace {

std::vector<int> selected_columns(const State& gamma) {
    std::vector<int> cols;
    for (std::size_t i = 0; i < gamma.size(); ++i)
        if (gamma[i]) cols.push_back(static_cast<int>(i));
    return cols;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ConfigError("malformed number '" + text + "' in dataset bundle");
    return v;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace

VarSelModel::VarSelModel(Eigen::MatrixXd design, Eigen::VectorXd response, VarSelHyper hyper)
    : design_(std::move(design)), response_(std::move(response)), hyper_(hyper) {
    if (design_.rows() < 1 || design_.cols() < 1) throw ConfigError("variable selection needs n >= 1 and p >= 1");
    if (response_.size() != design_.rows()) throw ConfigError("response length must equal the number of design rows");
    if (!(hyper_.g > 0.0) || !(hyper_.sigma2 > 0.0) || hyper_.nu < 0.0)
        throw ConfigError("variable selection needs g > 0, sigma2 > 0 and nu >= 0");
    c0_ = hyper_.nu * std::log(static_cast<double>(p())) + 0.5 * std::log1p(hyper_.g);
    c1_ = hyper_.g / (2.0 * hyper_.sigma2 * (hyper_.g + 1.0));
    gram_ = design_.transpose() * design_;
    design_response_ = design_.transpose() * response_;
}

double VarSelModel::projected_fit(std::vector<int> columns) const {
    std::sort(columns.begin(), columns.end());
    columns.erase(std::unique(columns.begin(), columns.end()), columns.end());
    if (columns.empty()) return 0.0;
    Eigen::MatrixXd sub(design_.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j] < 0 || columns[j] >= p()) throw std::invalid_argument("column index out of range");
        sub.col(static_cast<Eigen::Index>(j)) = design_.col(columns[j]);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
    qr.setThreshold(1e-10);
    if (qr.rank() < sub.cols())
        throw RankDeficientError("selected columns are linearly dependent (rank " + std::to_string(qr.rank()) + " < " +
                                 std::to_string(sub.cols()) + ")");
    const Eigen::VectorXd fitted = sub * qr.solve(response_);
    return fitted.squaredNorm();
}

double VarSelModel::log_posterior(const State& gamma) const {
    if (gamma.size() != static_cast<std::size_t>(p()))
        throw std::invalid_argument("model indicator has length " + std::to_string(gamma.size()) + ", expected " +
                                    std::to_string(p()));
    const std::vector<int> cols = selected_columns(gamma);
    return c1_ * projected_fit(cols) - c0_ * static_cast<double>(cols.size());
}

double varsel_log_posterior(const VarSelModel& model, const State& gamma) { return model.log_posterior(gamma); }

VarSelTarget::VarSelTarget(VarSelModel model)
    : BinaryTarget(static_cast<std::size_t>(model.p())), model_(std::move(model)) {}

double VarSelTarget::log_pi(const State& x) const { return model_.log_posterior(x); }

void VarSelTarget::neighbor_log_pis(const State& x, double, std::span<double> out) const {
    check_state(x);
    const Eigen::MatrixXd& gram = model_.gram();
    const Eigen::VectorXd& lty = model_.design_response();
    const std::vector<int> cols = selected_columns(x);
    const auto k = static_cast<Eigen::Index>(cols.size());
    const int p = model_.p();
    const double c0 = model_.c0();
    const double c1 = model_.c1();

    Eigen::MatrixXd sub_gram(k, k);
    Eigen::VectorXd sub_lty(k);
    for (Eigen::Index a = 0; a < k; ++a) {
        sub_lty(a) = lty(cols[a]);
        for (Eigen::Index b = 0; b < k; ++b) sub_gram(a, b) = gram(cols[a], cols[b]);
    }
    Eigen::LLT<Eigen::MatrixXd> chol(sub_gram);
    if (k > 0 && chol.info() != Eigen::Success) throw RankDeficientError("current model has a singular Gram matrix");
    Eigen::VectorXd coef = k > 0 ? Eigen::VectorXd(chol.solve(sub_lty)) : Eigen::VectorXd();
    const double base = k > 0 ? sub_lty.dot(coef) : 0.0;

    // Dropping column j: fit falls by coef_j^2 / (G^{-1})_jj.
    if (k > 0) {
        const Eigen::MatrixXd inverse = chol.solve(Eigen::MatrixXd::Identity(k, k));
        for (Eigen::Index a = 0; a < k; ++a) {
            const double fit = base - coef(a) * coef(a) / inverse(a, a);
            out[static_cast<std::size_t>(cols[a])] = c1 * fit - c0 * static_cast<double>(k - 1);
        }
    }
    // Adding column i: fit grows by (residual correlation)^2 / (Schur complement).
    Eigen::MatrixXd cross(k, p);
    for (Eigen::Index a = 0; a < k; ++a) cross.row(a) = gram.row(cols[a]);
    Eigen::MatrixXd whitened = cross;
    if (k > 0) chol.matrixL().solveInPlace(whitened);
    const Eigen::VectorXd residual_corr = k > 0 ? Eigen::VectorXd(lty - cross.transpose() * coef) : lty;
    for (int i = 0; i < p; ++i) {
        if (x[static_cast<std::size_t>(i)]) continue;
        const double schur = gram(i, i) - (k > 0 ? whitened.col(i).squaredNorm() : 0.0);
        if (!(schur > 1e-10 * gram(i, i)))
            throw RankDeficientError("column " + std::to_string(i) + " is collinear with the current model");
        const double fit = base + residual_corr(i) * residual_corr(i) / schur;
        out[static_cast<std::size_t>(i)] = c1 * fit - c0 * static_cast<double>(k + 1);
    }
}

std::string VarSelTarget::describe() const {
    return "varsel(n=" + std::to_string(model_.n()) + ",p=" + std::to_string(model_.p()) + ")";
}

std::string to_string(DataRecipe recipe) {
    return recipe == DataRecipe::SixMode ? "six-mode" : "intermediate-snr";
}

DataRecipe parse_data_recipe(const std::string& text) {
    if (text == "six-mode") return DataRecipe::SixMode;
    if (text == "intermediate-snr") return DataRecipe::IntermediateSNR;
    throw ConfigError("unknown data recipe '" + text + "' (expected six-mode or intermediate-snr)");
}

VarSelDataset generate_varsel_data(DataRecipe recipe, int n, int p, std::uint64_t seed) {
    VarSelHyper hyper;
    hyper.g = static_cast<double>(p) * p;
    hyper.nu = 1.0;
    hyper.sigma2 = 0.0;
    return generate_varsel_data(recipe, n, p, seed, hyper);
}

VarSelDataset generate_varsel_data(DataRecipe recipe, int n, int p, std::uint64_t seed, const VarSelHyper& hyper) {
    if (n < 1) throw ConfigError("dataset needs n >= 1");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd design(n, p);
    Eigen::VectorXd coefficients = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd response(n);
    double default_sigma2 = 0.0;

    if (recipe == DataRecipe::IntermediateSNR) {
        if (p < 20) throw ConfigError("intermediate-snr recipe needs p >= 20");
        // Rows are AR(1) with correlation e^{-1}, so Sigma_ij = e^{-|i-j|}.
        const double rho = std::exp(-1.0);
        const double innovation = std::sqrt(1.0 - rho * rho);
        for (int r = 0; r < n; ++r) {
            design(r, 0) = normal(rng);
            for (int c = 1; c < p; ++c) design(r, c) = rho * design(r, c - 1) + innovation * normal(rng);
        }
        const double scale = 2.0 * std::sqrt(std::log(static_cast<double>(p)) / n);
        std::uniform_real_distribution<double> magnitude(2.0, 3.0);
        std::bernoulli_distribution negative(0.5);
        for (int j = 0; j < 20; ++j) {
            const double m = magnitude(rng);
            coefficients(j) = scale * (negative(rng) ? -m : m);
        }
        response = design * coefficients;
        for (int r = 0; r < n; ++r) response(r) += normal(rng);
        default_sigma2 = response.squaredNorm() / n;
    } else {
        if (p < 8) throw ConfigError("six-mode recipe needs p >= 8");
        for (int c = 0; c < p; ++c) {
            if (c == 3 || c == 4 || c == 7) continue;
            for (int r = 0; r < n; ++r) design(r, c) = normal(rng);
        }
        for (int r = 0; r < n; ++r) design(r, 3) = design(r, 1) - design(r, 2) + 0.1 * normal(rng);
        for (int r = 0; r < n; ++r)
            design(r, 4) = design(r, 0) + design(r, 1) + design(r, 2) + design(r, 5) + design(r, 6) + 0.1 * normal(rng);
        for (int r = 0; r < n; ++r) design(r, 7) = design(r, 5) - design(r, 6) + 0.1 * normal(rng);
        std::uniform_real_distribution<double> effect(4.0, 6.0);
        const double beta = std::sqrt(std::log(static_cast<double>(p)) / n) * effect(rng);
        coefficients(0) = coefficients(1) = coefficients(2) = beta;
        for (int r = 0; r < n; ++r)
            response(r) = (design(r, 0) + design(r, 1) + design(r, 2)) * beta + 0.5 * normal(rng);
        default_sigma2 = 2.0;
    }

    VarSelHyper used = hyper;
    if (!(used.sigma2 > 0.0)) used.sigma2 = default_sigma2;
    return VarSelDataset{recipe, seed, VarSelModel(std::move(design), std::move(response), used),
                         std::move(coefficients)};
}

std::vector<std::vector<int>> six_mode_sets() {
    return {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {4, 5, 6}, {4, 5, 7}, {4, 6, 7}};
}

State subset_state(int p, const std::vector<int>& columns) {
    State x(static_cast<std::size_t>(p), 0);
    for (int c : columns) x.at(static_cast<std::size_t>(c)) = 1;
    return x;
}

bool planted_modes_are_local_maxima(const VarSelModel& model) {
    for (const auto& mode : six_mode_sets()) {
        State x = subset_state(model.p(), mode);
        const double value = model.log_posterior(x);
        for (int i = 0; i < model.p(); ++i) {
            x[static_cast<std::size_t>(i)] ^= 1;
            const double other = model.log_posterior(x);
            x[static_cast<std::size_t>(i)] ^= 1;
            if (other >= value) return false;
        }
    }
    return true;
}

void export_dataset(const VarSelDataset& data, const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    const VarSelModel& m = data.model;
    {
        std::ofstream out(directory / "design.csv");
        for (int c = 0; c < m.p(); ++c) out << (c ? "," : "") << "L" << (c + 1);
        out << "\n";
        for (int r = 0; r < m.n(); ++r) {
            for (int c = 0; c < m.p(); ++c) out << (c ? "," : "") << format_double(m.design()(r, c));
            out << "\n";
        }
    }
    {
        std::ofstream out(directory / "response.csv");
        out << "Y\n";
        for (int r = 0; r < m.n(); ++r) out << format_double(m.response()(r)) << "\n";
    }
    {
        std::ofstream out(directory / "coefficients.csv");
        out << "beta\n";
        for (int c = 0; c < m.p(); ++c) out << format_double(data.coefficients(c)) << "\n";
    }
    std::ofstream out(directory / "meta.csv");
    out << "key,value\n";
    out << "recipe," << to_string(data.recipe) << "\n";
    out << "seed," << data.seed << "\n";
    out << "n," << m.n() << "\n";
    out << "p," << m.p() << "\n";
    out << "g," << format_double(m.hyper().g) << "\n";
    out << "nu," << format_double(m.hyper().nu) << "\n";
    out << "sigma2," << format_double(m.hyper().sigma2) << "\n";
}

VarSelDataset import_dataset(const std::filesystem::path& directory) {
    std::map<std::string, std::string> meta;
    for (const auto& row : read_csv(directory / "meta.csv"))
        if (row.size() == 2 && row[0] != "key") meta[row[0]] = row[1];
    for (const char* key : {"recipe", "seed", "n", "p", "g", "nu", "sigma2"})
        if (!meta.count(key)) throw ConfigError(std::string("dataset bundle meta.csv lacks field '") + key + "'");
    const int n = std::stoi(meta["n"]);
    const int p = std::stoi(meta["p"]);
    const auto design_rows = read_csv(directory / "design.csv");
    const auto response_rows = read_csv(directory / "response.csv");
    if (static_cast<int>(design_rows.size()) != n + 1 || static_cast<int>(response_rows.size()) != n + 1)
        throw ConfigError("dataset bundle row counts disagree with meta.csv");
    Eigen::MatrixXd design(n, p);
    Eigen::VectorXd response(n);
    for (int r = 0; r < n; ++r) {
        const auto& row = design_rows[static_cast<std::size_t>(r + 1)];
        if (static_cast<int>(row.size()) != p) throw ConfigError("design.csv row " + std::to_string(r + 2) + " has wrong width");
        for (int c = 0; c < p; ++c) design(r, c) = parse_double(row[static_cast<std::size_t>(c)]);
        response(r) = parse_double(response_rows[static_cast<std::size_t>(r + 1)].at(0));
    }
    Eigen::VectorXd coefficients = Eigen::VectorXd::Zero(p);
    if (std::filesystem::exists(directory / "coefficients.csv")) {
        const auto rows = read_csv(directory / "coefficients.csv");
        for (int c = 0; c < p && c + 1 < static_cast<int>(rows.size()); ++c)
            coefficients(c) = parse_double(rows[static_cast<std::size_t>(c + 1)].at(0));
    }
    VarSelHyper hyper{parse_double(meta["g"]), parse_double(meta["nu"]), parse_double(meta["sigma2"])};
    return VarSelDataset{parse_data_recipe(meta["recipe"]), std::stoull(meta["seed"]),
                         VarSelModel(std::move(design), std::move(response), hyper), std::move(coefficients)};
}

VarSelModel calibrated_toy_design(const ToySpec& spec, int n, std::uint64_t seed) {
    spec.validate();
    const int p = spec.p;
    const double theta = spec.theta;
    if (spec.example == ToyExample::Toy4) throw ConfigError("no calibrated design for toy4");
    if (n < p + 1) throw ConfigError("calibrated design needs n >= p + 1");

    // Hyperparameters with c0 = theta: half of theta from the size prior, half from g.
    VarSelHyper hyper;
    hyper.sigma2 = 1.0;
    if (p >= 2) {
        hyper.g = std::expm1(theta);
        hyper.nu = theta / (2.0 * std::log(static_cast<double>(p)));
    } else {
        hyper.g = std::expm1(2.0 * theta);
        hyper.nu = 0.0;
    }
    const double c1 = hyper.g / (2.0 * hyper.sigma2 * (hyper.g + 1.0));

    Eigen::MatrixXd correlation = Eigen::MatrixXd::Identity(p, p);
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(p);
    switch (spec.example) {
        case ToyExample::Toy1: {
            const double b = std::sqrt(2.0 * theta / (c1 * n));
            for (int i = 0; i < spec.p1; ++i) coef(i) = b;
            break;
        }
        case ToyExample::Toy2: {
            const double eps = std::sqrt(2.0 / (2.0 * p + 1.0));
            for (int i = 1; i < p; ++i) correlation(0, i) = correlation(i, 0) = eps;
            coef(0) = std::sqrt((2.0 * p + 1.0) * theta / (c1 * n));
            break;
        }
        case ToyExample::Toy3: {
            const double eps = std::log(std::cosh(theta)) / theta;
            correlation(0, 1) = correlation(1, 0) = eps;
            coef(0) = coef(1) = std::sqrt(theta / (c1 * n * (1.0 + eps)));
            const double b = std::sqrt(2.0 * theta / (c1 * n));
            for (int i = 2; i <= spec.p1; ++i) coef(i) = b;
            break;
        }
        case ToyExample::Toy4:
            break;
    }

    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd raw(n, p + 1);
    for (int c = 0; c < p + 1; ++c)
        for (int r = 0; r < n; ++r) raw(r, c) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
    const Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(n, p + 1);
    Eigen::LLT<Eigen::MatrixXd> chol(correlation);
    if (chol.info() != Eigen::Success) throw ConfigError("calibrated correlation matrix is not positive definite");
    const Eigen::MatrixXd upper = chol.matrixL().transpose();
    Eigen::MatrixXd design = std::sqrt(static_cast<double>(n)) * basis.leftCols(p) * upper;
    Eigen::VectorXd response = design * coef + std::sqrt(static_cast<double>(n)) * basis.col(p);
    return VarSelModel(std::move(design), std::move(response), hyper);
}

}  // namespace iit
