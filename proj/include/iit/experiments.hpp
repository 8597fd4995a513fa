#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "iit/samplers.hpp"

namespace iit {

using Json = nlohmann::json;

inline constexpr const char* kToolkitVersion = "1.0.0";
// Default output root when a config leaves `output` relative; overridden by this variable.
inline constexpr const char* kOutputDirVariable = "IIT_OUTPUT_DIR";

enum class ExperimentKind { TvThreshold, Estimate, Table1, AppendixAVerify, SixMode, Abc, GaussianMtit, HittingTime };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& text);

// One sampler of a head-to-head comparison.
struct SamplerSpec {
    std::string label;
    SamplerConfig config;
    // When positive, h = HC(c_per_theta * theta) at each theta of the grid.
    double c_per_theta = 0.0;
    // When positive, RN-IIT uses m = max(1, round(m_per_p * p)).
    double m_per_p = 0.0;

    SamplerConfig resolve(double theta, int p) const;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::TvThreshold;
    std::string name;
    std::uint64_t seed = 0;
    std::size_t replicates = 1;
    std::uint64_t budget = 1;
    std::string output;
    std::size_t workers = 1;
    Json target;    // normalized target section
    Json settings;  // normalized kind-specific section
    std::vector<SamplerSpec> samplers;
    // Complete configuration with every default filled in.
    Json echo;
};

// Validates a parsed document; errors are ConfigError naming the offending field.
ExperimentConfig parse_config(const Json& document);
// Reads and validates a JSON config file; syntax errors report the line.
ExperimentConfig load_config(const std::filesystem::path& path);

struct ExperimentResult {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    Json summary;
    Json provenance;
    // Sum of the posterior-call ledgers of every sampler run.
    std::uint64_t total_calls = 0;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

// Exact reference quantities for a config without running any sampler.
Json analyze_experiment(const ExperimentConfig& config);

// `output` resolved against IIT_OUTPUT_DIR (or ./results) when relative.
std::filesystem::path resolve_output_directory(const std::string& output);

// Writes results.csv, summary.json and provenance.json; returns the directory.
std::filesystem::path write_artifacts(const ExperimentResult& result, const std::filesystem::path& directory);

std::string to_csv(const ExperimentResult& result);

struct Recipe {
    std::string name;
    std::string anchor;       // reproduced artifact
    std::string description;  // desk-scale parameters
    Json config;
};

const std::vector<Recipe>& recipes();
// Throws ConfigError for an unknown name.
const Recipe& find_recipe(const std::string& name);
std::string list_recipes_text();

struct RecipeOverrides {
    std::optional<int> p;
    std::optional<std::vector<double>> theta;
    std::optional<std::size_t> replicates;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> budget;
    std::optional<std::size_t> workers;
    std::optional<std::string> output;
};

// Recipe config with overrides applied; `p` also rescales dimension-tied fields.
Json recipe_config(const Recipe& recipe, const RecipeOverrides& overrides);

// Decimal text used in every artifact: shortest form that round-trips to 12 significant digits.
std::string format_number(double value);

}  // namespace iit
