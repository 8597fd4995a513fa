#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "iit/errors.hpp"
#include "iit/experiments.hpp"

using namespace iit;

namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("iit_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args, const fs::path& stdout_file) {
    const std::string command = std::string(IIT_CLI_PATH) + " " + args + " > " + stdout_file.string() + " 2>&1";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_error(const Json& document) {
    try {
        parse_config(document);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

Json small_tv_config() {
    return Json::parse(R"({
        "kind": "tv-threshold", "seed": 5, "replicates": 3, "budget": 20000,
        "target": {"example": "toy1", "p": 12, "p1": 3, "theta": [1, 3]},
        "samplers": [{"algorithm": "mh"}, {"algorithm": "naive-iit"},
                     {"algorithm": "rn-iit", "m_per_p": 0.25, "label": "rn"}]
    })");
}

}  // namespace

TEST_CASE("config validation names the offending field") {
    Json doc = small_tv_config();
    doc.erase("seed");
    CHECK(config_error(doc).find("'seed'") != std::string::npos);
    CHECK(config_error(doc).find("missing") != std::string::npos);

    doc = small_tv_config();
    doc["replicates"] = 0;
    CHECK(config_error(doc).find("'replicates'") != std::string::npos);

    doc = small_tv_config();
    doc["budget"] = 0;
    CHECK(config_error(doc).find("'budget'") != std::string::npos);

    doc = small_tv_config();
    doc["samplers"][1]["algorithm"] = "gibbs";
    CHECK(config_error(doc).find("'samplers[1].algorithm'") != std::string::npos);

    doc = small_tv_config();
    doc["samplers"][0]["m"] = 3;
    CHECK(config_error(doc).find("'samplers[0].m'") != std::string::npos);

    doc = small_tv_config();
    doc["target"]["p1"] = 40;
    CHECK(config_error(doc).find("'target.theta'") != std::string::npos);

    doc = small_tv_config();
    doc["colour"] = "blue";
    CHECK(config_error(doc).find("'colour'") != std::string::npos);

    doc = small_tv_config();
    doc["samplers"][1]["label"] = "mh";
    CHECK(config_error(doc).find("duplicate") != std::string::npos);

    doc = small_tv_config();
    doc["samplers"] = Json::array({Json{{"algorithm", "p-iit"}}});
    CHECK(config_error(doc).find("'samplers[0].algorithm'") != std::string::npos);

    doc = small_tv_config();
    doc["kind"] = "plot";
    CHECK(config_error(doc).find("'kind'") != std::string::npos);

    CHECK_THROWS_AS(parse_config(Json::array()), ConfigError);
}

TEST_CASE("defaults are written back into the config echo") {
    const ExperimentConfig config = parse_config(small_tv_config());
    CHECK(config.echo.at("workers") == 1);
    CHECK(config.echo.at("settings").at("threshold") == 0.1);
    CHECK(config.echo.at("settings").at("call_stride") == 100);
    CHECK(config.echo.at("settings").at("initial") == "zeros");
    CHECK(config.echo.at("samplers").at(0).at("h") == "min1");
    CHECK(config.echo.at("samplers").at(1).at("h") == "sqrt");
    CHECK(config.samplers.at(2).resolve(1.0, 12).m == 3);
    // Re-parsing the echo gives the same echo.
    CHECK(parse_config(config.echo).echo == config.echo);
}

TEST_CASE("every recipe parses and the listing is stable") {
    for (const Recipe& recipe : recipes()) CHECK_NOTHROW(parse_config(recipe.config));
    const std::string text = list_recipes_text();
    CHECK(text == list_recipes_text());
    CHECK(text.find("table1\n") != std::string::npos);
    CHECK(text.find("toy2 p=5") != std::string::npos);
    CHECK(text.find("abc\n") != std::string::npos);
    CHECK(text.find("a=0.5, b=0.4, K=100") != std::string::npos);
    CHECK_THROWS_AS(find_recipe("fig9"), ConfigError);
}

TEST_CASE("overrides rescale dimension-tied fields") {
    RecipeOverrides o;
    o.p = 50;
    o.theta = std::vector<double>{2.0, 4.0};
    o.replicates = 2;
    const ExperimentConfig config = parse_config(recipe_config(find_recipe("fig1"), o));
    CHECK(config.target.at("p") == 50);
    CHECK(config.target.at("p1") == 5);
    CHECK(config.target.at("theta") == Json::array({2.0, 4.0}));
    CHECK(config.replicates == 2);
    const auto rn = std::find_if(config.samplers.begin(), config.samplers.end(),
                                 [](const SamplerSpec& s) { return s.label == "RN-IIT"; });
    REQUIRE(rn != config.samplers.end());
    CHECK(rn->resolve(2.0, 50).m == 10);
    const ExperimentConfig fig2 = parse_config(recipe_config(find_recipe("fig2"), {}));
    for (const SamplerSpec& s : fig2.samplers)
        if (s.label == "MH-IIT-2") CHECK(s.resolve(3.0, 100).h == BalancingFunction::hc(6.0));
}

TEST_CASE("runs are deterministic and the call totals match the rows") {
    const ExperimentConfig config = parse_config(small_tv_config());
    const ExperimentResult a = run_experiment(config);
    ExperimentConfig threaded = config;
    threaded.workers = 4;
    const ExperimentResult b = run_experiment(threaded);
    CHECK(to_csv(a) == to_csv(b));
    CHECK(a.summary.dump() == b.summary.dump());
    CHECK(a.rows.size() == 2 * 3 * 3);
    std::uint64_t sum = 0;
    const auto column = std::find(a.header.begin(), a.header.end(), "calls_spent") - a.header.begin();
    for (const auto& row : a.rows) sum += std::stoull(row[static_cast<std::size_t>(column)]);
    CHECK(sum == a.total_calls);
    CHECK(a.summary.at("total_calls") == a.total_calls);
    std::uint64_t grouped = 0;
    for (const Json& g : a.summary.at("groups")) grouped += g.at("total_calls").get<std::uint64_t>();
    CHECK(grouped == a.total_calls);
    CHECK(a.provenance.at("seeds").size() == a.rows.size());
    CHECK(a.provenance.at("config") == config.echo);

    ExperimentConfig reseeded = config;
    reseeded.seed = 6;
    CHECK(to_csv(run_experiment(reseeded)) != to_csv(a));
}

TEST_CASE("estimate and analysis share the exact reference") {
    const Json doc = Json::parse(R"({"kind": "estimate", "seed": 1, "replicates": 2, "budget": 20000})");
    const ExperimentConfig config = parse_config(doc);
    const Json report = analyze_experiment(config);
    CHECK(report.at("exact").at(0).at("value").get<double>() == doctest::Approx(0.3907118));
    const ExperimentResult r = run_experiment(config);
    CHECK(r.rows.size() == 3 * 2);
    for (const Json& g : r.summary.at("groups")) CHECK(g.at("max_abs_error").get<double>() < 0.05);
}

TEST_CASE("artifacts land under the output directory variable") {
    const fs::path root = scratch_dir("env");
    ::setenv(kOutputDirVariable, root.c_str(), 1);
    CHECK(resolve_output_directory("fig") == root / "fig");
    CHECK(resolve_output_directory("/abs/x") == fs::path("/abs/x"));
    ::unsetenv(kOutputDirVariable);
    CHECK(resolve_output_directory("fig") == fs::path("results") / "fig");

    const ExperimentResult r = run_experiment(parse_config(small_tv_config()));
    const fs::path dir = write_artifacts(r, root / "direct");
    CHECK(read_file(dir / "results.csv") == to_csv(r));
    CHECK(Json::parse(read_file(dir / "summary.json")) == r.summary);
    CHECK(Json::parse(read_file(dir / "provenance.json")).at("toolkit_version") == kToolkitVersion);
}

TEST_CASE("command-line driver") {
    const fs::path dir = scratch_dir("binary");
    const fs::path log = dir / "out.txt";

    std::ofstream(dir / "missing_seed.json") << R"({"kind": "estimate", "replicates": 2})";
    CHECK(run_cli("run " + (dir / "missing_seed.json").string(), log) == 2);
    CHECK(read_file(log).find("'seed'") != std::string::npos);

    std::ofstream(dir / "broken.json") << "{\n  \"kind\": \"estimate\",\n  seed: 1\n}";
    CHECK(run_cli("run " + (dir / "broken.json").string(), log) == 2);
    CHECK(read_file(log).find("line 3") != std::string::npos);

    CHECK(run_cli("list-recipes", log) == 0);
    const std::string listing = read_file(log);
    CHECK(run_cli("list-recipes", log) == 0);
    CHECK(read_file(log) == listing);
    CHECK(listing == list_recipes_text());

    CHECK(run_cli("reproduce nosuch", log) == 2);
    CHECK(run_cli("frobnicate", log) == 2);

    const std::string env = "IIT_OUTPUT_DIR=" + dir.string() + " ";
    const std::string args = "reproduce fig1 --p 20 --theta 1,4 --replicates 2 --budget 20000";
    const auto run_env = [&](const std::string& extra) {
        const std::string command =
            env + std::string(IIT_CLI_PATH) + " " + args + extra + " > " + log.string() + " 2>&1";
        const int status = std::system(command.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    REQUIRE(run_env("") == 0);
    const std::string first = read_file(dir / "fig1" / "results.csv");
    CHECK(first.rfind("experiment,theta,p,sampler,replicate,seed,calls_to_threshold,censored,final_tv,calls_spent\n", 0) == 0);
    REQUIRE(run_env(" --workers 3") == 0);
    CHECK(read_file(dir / "fig1" / "results.csv") == first);
    const Json provenance = Json::parse(read_file(dir / "fig1" / "provenance.json"));
    CHECK(provenance.at("config").at("target").at("p") == 20);

    std::ofstream(dir / "est.json") << R"({"kind": "estimate", "seed": 3, "replicates": 2, "budget": 5000})";
    CHECK(run_cli("analyze " + (dir / "est.json").string(), log) == 0);
    CHECK(read_file(log).find("0.39071") != std::string::npos);
}
