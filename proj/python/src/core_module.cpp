#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "iit/analysis.hpp"
#include "iit/balancing.hpp"
#include "iit/errors.hpp"
#include "iit/experiments.hpp"
#include "iit/toys.hpp"

namespace py = pybind11;

namespace {

iit::ExperimentConfig config_from_text(const std::string& text) {
    iit::Json document;
    try {
        document = iit::Json::parse(text);
    } catch (const iit::Json::parse_error& e) {
        throw iit::ConfigError(e.what());
    }
    return iit::parse_config(document);
}

py::dict run_config(const std::string& text, std::size_t workers) {
    iit::ExperimentConfig config = config_from_text(text);
    if (workers > 0) config.workers = workers;
    iit::ExperimentResult result;
    {
        py::gil_scoped_release release;
        result = iit::run_experiment(config);
    }
    py::dict out;
    out["header"] = result.header;
    out["rows"] = result.rows;
    out["csv"] = iit::to_csv(result);
    out["summary"] = result.summary.dump();
    out["provenance"] = result.provenance.dump();
    out["total_calls"] = result.total_calls;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Informed importance tempering samplers";
    m.attr("__version__") = iit::kToolkitVersion;

    py::register_exception<iit::ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def("log_balancing", [](const std::string& h, double log_r) { return iit::BalancingFunction::parse(h).log_apply(log_r); },
          py::arg("h"), py::arg("log_r"), "log h(e^log_r) for a balancing function name such as 'sqrt' or 'hc:2'");

    m.def(
        "toy_pushforward",
        [](const std::string& example, int p, int p1, double theta) {
            iit::ToySpec spec{iit::parse_toy_example(example), p, p1, theta};
            spec.validate();
            const iit::PushForward law = iit::toy_pushforward_exact(spec);
            return std::make_pair(law.keys(), law.probabilities());
        },
        py::arg("example"), py::arg("p"), py::arg("p1"), py::arg("theta"),
        "Exact law of the summary statistic as (keys, probabilities)");

    m.def("expected_cost", &iit::expected_cost, py::arg("Z"), py::arg("neighbor_count"), py::arg("rho"),
          "Expected posterior calls per mixed-estimator round");

    m.def(
        "complexity_grid",
        [](int p, double theta, double c_min, double c_max, double step) {
            std::vector<std::vector<double>> rows;
            for (const iit::ComplexityRow& r : iit::complexity_grid(p, theta, c_min, c_max, step))
                rows.push_back({r.theta, r.c, r.gap, r.comp_rho0, r.comp_rho1, r.comp_rho_half});
            return rows;
        },
        py::arg("p"), py::arg("theta"), py::arg("c_min") = 0.0, py::arg("c_max") = 6.0, py::arg("step") = 0.01,
        "Rows (theta, c, gap, comp_rho0, comp_rho1, comp_rho0.5) for Toy2 under HC(c)");

    m.def("run_config", &run_config, py::arg("config"), py::arg("workers") = 0,
          "Run an experiment from JSON text; workers > 0 overrides the config");
    m.def("normalize_config", [](const std::string& text) { return config_from_text(text).echo.dump(); },
          py::arg("config"), "Validated config with every default filled in, as JSON text");
    m.def("analyze_config", [](const std::string& text) { return iit::analyze_experiment(config_from_text(text)).dump(); },
          py::arg("config"), "Exact reference quantities for a config, as JSON text");
    m.def("list_recipes", &iit::list_recipes_text);
    m.def(
        "recipe_config", [](const std::string& name) { return iit::recipe_config(iit::find_recipe(name), {}).dump(); },
        py::arg("name"), "Config of a canned recipe, as JSON text");
}
