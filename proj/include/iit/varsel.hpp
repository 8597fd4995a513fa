#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iit/target.hpp"

namespace iit {

struct VarSelHyper {
    double g = 1.0;
    double nu = 1.0;
    double sigma2 = 1.0;
};

// Linear-regression model-selection posterior log pi(gamma) = c1 Y' P_gamma Y - c0 |gamma| with
// c0 = nu log p + log(1 + g) / 2 and c1 = g / (2 sigma2 (g + 1)).
class VarSelModel {
public:
    VarSelModel(Eigen::MatrixXd design, Eigen::VectorXd response, VarSelHyper hyper);

    int n() const { return static_cast<int>(design_.rows()); }
    int p() const { return static_cast<int>(design_.cols()); }
    const VarSelHyper& hyper() const { return hyper_; }
    double c0() const { return c0_; }
    double c1() const { return c1_; }
    const Eigen::MatrixXd& design() const { return design_; }
    const Eigen::VectorXd& response() const { return response_; }
    const Eigen::MatrixXd& gram() const { return gram_; }
    const Eigen::VectorXd& design_response() const { return design_response_; }

    // Y' P Y for the column set (duplicates ignored), by a least-squares solve on the selected columns.
    double projected_fit(std::vector<int> columns) const;
    double log_posterior(const State& gamma) const;

private:
    Eigen::MatrixXd design_;
    Eigen::VectorXd response_;
    VarSelHyper hyper_;
    double c0_ = 0.0;
    double c1_ = 0.0;
    Eigen::MatrixXd gram_;
    Eigen::VectorXd design_response_;
};

double varsel_log_posterior(const VarSelModel& model, const State& gamma);

// The posterior as a binary target; neighborhood sweeps use Gram-matrix updates.
class VarSelTarget : public BinaryTarget {
public:
    explicit VarSelTarget(VarSelModel model);

    const VarSelModel& model() const { return model_; }
    double log_pi(const State& x) const override;
    void neighbor_log_pis(const State& x, double log_pi_x, std::span<double> out) const override;
    std::string describe() const override;

private:
    VarSelModel model_;
};

enum class DataRecipe { IntermediateSNR, SixMode };

std::string to_string(DataRecipe recipe);
DataRecipe parse_data_recipe(const std::string& text);

struct VarSelDataset {
    DataRecipe recipe = DataRecipe::SixMode;
    std::uint64_t seed = 0;
    VarSelModel model;
    Eigen::VectorXd coefficients;
};

// Default hyperparameters: g = p^2, nu = 1; sigma2 is the null-model residual variance Y'Y/n
// for IntermediateSNR and 2 for SixMode.
VarSelDataset generate_varsel_data(DataRecipe recipe, int n, int p, std::uint64_t seed);
VarSelDataset generate_varsel_data(DataRecipe recipe, int n, int p, std::uint64_t seed, const VarSelHyper& hyper);

// The six planted local modes of the SixMode construction (0-based column sets).
std::vector<std::vector<int>> six_mode_sets();
State subset_state(int p, const std::vector<int>& columns);
// True when every planted mode beats all of its single-flip neighbors.
bool planted_modes_are_local_maxima(const VarSelModel& model);

// CSV bundle: design.csv, response.csv, meta.csv (recipe, seed, n, p, g, nu, sigma2).
void export_dataset(const VarSelDataset& data, const std::filesystem::path& directory);
VarSelDataset import_dataset(const std::filesystem::path& directory);

// Design whose posterior reproduces a toy target exactly (orthogonal or block-correlated columns,
// residual orthogonal to every column). Supports Toy1, Toy2 and Toy3 settings.
struct ToySpec;
VarSelModel calibrated_toy_design(const ToySpec& spec, int n, std::uint64_t seed);

}  // namespace iit
