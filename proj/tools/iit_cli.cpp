#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "iit/errors.hpp"
#include "iit/experiments.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCapacity = 3;

void report(const iit::ExperimentConfig& config, const iit::ExperimentResult& result,
            const std::filesystem::path& directory) {
    std::cout << "experiment " << config.name << " (" << iit::to_string(config.kind) << "): " << result.rows.size()
              << " rows, " << result.total_calls << " posterior calls\n";
    std::cout << "artifacts in " << directory.string() << "\n";
    std::cout << result.summary.dump(2) << "\n";
}

int execute(const iit::ExperimentConfig& config, std::optional<std::size_t> workers) {
    iit::ExperimentConfig run = config;
    if (workers) run.workers = *workers;
    const iit::ExperimentResult result = iit::run_experiment(run);
    const auto directory = iit::write_artifacts(result, iit::resolve_output_directory(run.output));
    report(run, result, directory);
    return 0;
}

template <class Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const iit::ConfigError& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return kExitConfig;
    } catch (const iit::CapacityError& e) {
        std::cerr << "capacity exceeded: " << e.what() << "\n";
        return kExitCapacity;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Informed importance tempering samplers and experiment driver"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::size_t> workers;
    auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
    run->add_option("config", config_path, "Config file")->required();
    run->add_option("--workers", workers, "Replicate worker threads (overrides the config)");

    std::string recipe_name;
    iit::RecipeOverrides overrides;
    bool print_config = false;
    auto* reproduce = app.add_subcommand("reproduce", "Run a canned recipe at desk scale");
    reproduce->add_option("recipe", recipe_name, "Recipe name (see list-recipes)")->required();
    reproduce->add_option("--p", overrides.p, "Dimension; dimension-tied fields are rescaled");
    reproduce->add_option("--theta", overrides.theta, "Comma-separated theta grid")->delimiter(',');
    reproduce->add_option("--replicates", overrides.replicates, "Replicates per sampler and theta");
    reproduce->add_option("--seed", overrides.seed, "Master seed");
    reproduce->add_option("--budget", overrides.budget, "Posterior-call budget per run");
    reproduce->add_option("--workers", overrides.workers, "Replicate worker threads");
    reproduce->add_option("--output", overrides.output, "Output directory");
    reproduce->add_flag("--print-config", print_config, "Print the resolved config and exit");

    auto* list = app.add_subcommand("list-recipes", "List canned recipes and their desk-scale parameters");

    std::string analyze_path;
    auto* analyze = app.add_subcommand("analyze", "Print exact reference quantities for a config without sampling");
    analyze->add_option("config", analyze_path, "Config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    if (run->parsed()) return guarded([&] { return execute(iit::load_config(config_path), workers); });
    if (reproduce->parsed()) {
        return guarded([&] {
            const iit::Json document = iit::recipe_config(iit::find_recipe(recipe_name), overrides);
            const iit::ExperimentConfig config = iit::parse_config(document);
            if (print_config) {
                std::cout << config.echo.dump(2) << "\n";
                return 0;
            }
            return execute(config, std::nullopt);
        });
    }
    if (list->parsed()) {
        std::cout << iit::list_recipes_text();
        return 0;
    }
    if (analyze->parsed()) {
        return guarded([&] {
            std::cout << iit::analyze_experiment(iit::load_config(analyze_path)).dump(2) << "\n";
            return 0;
        });
    }
    return kExitFailure;
}
