#include "iit/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "iit/abc.hpp"
#include "iit/analysis.hpp"
#include "iit/continuous.hpp"
#include "iit/diagnostics.hpp"
#include "iit/errors.hpp"
#include "iit/toys.hpp"
#include "iit/varsel.hpp"

namespace iit {

namespace {

constexpr std::uint64_t kUnlimited = std::numeric_limits<std::uint64_t>::max() - 1;

// Reads one JSON object, records every value it returns (defaults included) into `out`, and names
// the full field path in every error.
class FieldReader {
public:
    FieldReader(const Json& source, Json& out, std::string path) : source_(source), out_(out), path_(std::move(path)) {
        if (!source_.is_null() && !source_.is_object()) throw ConfigError("field '" + path_ + "': expected an object");
        if (!out_.is_object()) out_ = Json::object();
    }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    [[noreturn]] void fail(const std::string& key, const std::string& message) const {
        throw ConfigError("field '" + where(key) + "': " + message);
    }

    bool has(const std::string& key) const { return source_.is_object() && source_.contains(key); }

    const Json* raw(const std::string& key) const { return has(key) ? &source_.at(key) : nullptr; }

    double number(const std::string& key, std::optional<double> fallback) {
        const Json* v = raw(key);
        double value = 0.0;
        if (!v) {
            if (!fallback) fail(key, "required field is missing");
            value = *fallback;
        } else {
            if (!v->is_number()) fail(key, "expected a number");
            value = v->get<double>();
            if (!std::isfinite(value)) fail(key, "expected a finite number");
        }
        out_[key] = value;
        return value;
    }

    double number_in(const std::string& key, std::optional<double> fallback, double lo, double hi) {
        const double value = number(key, fallback);
        if (value < lo || value > hi) fail(key, "must lie in [" + format_number(lo) + ", " + format_number(hi) + "]");
        return value;
    }

    double positive(const std::string& key, std::optional<double> fallback) {
        const double value = number(key, fallback);
        if (!(value > 0.0)) fail(key, "must be positive");
        return value;
    }

    std::uint64_t integer(const std::string& key, std::optional<std::uint64_t> fallback, std::uint64_t minimum = 0) {
        const Json* v = raw(key);
        std::uint64_t value = 0;
        if (!v) {
            if (!fallback) fail(key, "required field is missing");
            value = *fallback;
        } else if (v->is_number_unsigned()) {
            value = v->get<std::uint64_t>();
        } else if (v->is_number_integer()) {
            if (v->get<std::int64_t>() < 0) fail(key, "must be non-negative");
            value = static_cast<std::uint64_t>(v->get<std::int64_t>());
        } else if (v->is_number_float()) {
            const double d = v->get<double>();
            if (!(d >= 0.0) || d != std::floor(d) || d > 1.8e19) fail(key, "expected a non-negative integer");
            value = static_cast<std::uint64_t>(d);
        } else {
            fail(key, "expected a non-negative integer");
        }
        if (value < minimum) fail(key, "must be at least " + std::to_string(minimum));
        out_[key] = value;
        return value;
    }

    int small_integer(const std::string& key, std::optional<int> fallback, int minimum) {
        const std::uint64_t value = integer(key, fallback ? std::optional<std::uint64_t>(static_cast<std::uint64_t>(*fallback))
                                                         : std::nullopt,
                                            static_cast<std::uint64_t>(minimum));
        if (value > 1000000) fail(key, "is too large");
        return static_cast<int>(value);
    }

    bool flag(const std::string& key, bool fallback) {
        const Json* v = raw(key);
        bool value = fallback;
        if (v) {
            if (!v->is_boolean()) fail(key, "expected true or false");
            value = v->get<bool>();
        }
        out_[key] = value;
        return value;
    }

    std::string text(const std::string& key, std::optional<std::string> fallback) {
        const Json* v = raw(key);
        std::string value;
        if (!v) {
            if (!fallback) fail(key, "required field is missing");
            value = *fallback;
        } else {
            if (!v->is_string()) fail(key, "expected a string");
            value = v->get<std::string>();
        }
        out_[key] = value;
        return value;
    }

    // Accepts a scalar or an array of numbers.
    std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback) {
        const Json* v = raw(key);
        std::vector<double> values;
        if (!v) {
            if (!fallback) fail(key, "required field is missing");
            values = *fallback;
        } else if (v->is_number()) {
            values.push_back(v->get<double>());
        } else if (v->is_array()) {
            for (const Json& item : *v) {
                if (!item.is_number()) fail(key, "expected an array of numbers");
                values.push_back(item.get<double>());
            }
        } else {
            fail(key, "expected a number or an array of numbers");
        }
        if (values.empty()) fail(key, "must not be empty");
        for (double x : values)
            if (!std::isfinite(x)) fail(key, "expected finite numbers");
        out_[key] = values;
        return values;
    }

    // Balancing function given as min1, sqrt, barker, max1 or hc:<c>.
    BalancingFunction balancing(const std::string& key, const std::string& fallback) {
        const std::string name = text(key, fallback);
        try {
            return BalancingFunction::parse(name);
        } catch (const ConfigError& e) {
            fail(key, e.what());
        }
    }

    FieldReader child(const std::string& key) {
        const Json* v = raw(key);
        if (v && !v->is_object()) fail(key, "expected an object");
        out_[key] = Json::object();
        return FieldReader(v ? *v : null_, out_[key], where(key));
    }

    void reject_unknown(std::initializer_list<const char*> allowed) const {
        if (!source_.is_object()) return;
        for (const auto& item : source_.items()) {
            const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; });
            if (!known) fail(item.key(), "unknown field");
        }
    }

private:
    static inline const Json null_ = Json();
    const Json& source_;
    Json& out_;
    std::string path_;
};

ToyExample toy_example_field(FieldReader& reader, const std::string& fallback, bool allow_noisy, bool& noisy) {
    const std::string name = reader.text("example", fallback);
    noisy = false;
    if (name == "noisy-toy2") {
        if (!allow_noisy) reader.fail("example", "noisy-toy2 is only available for tv-threshold experiments");
        noisy = true;
        return ToyExample::Toy2;
    }
    try {
        return parse_toy_example(name);
    } catch (const ConfigError& e) {
        reader.fail("example", e.what());
    }
}

struct ToyGrid {
    ToyExample example = ToyExample::Toy1;
    bool noisy = false;
    double sigma = 0.0;
    int p = 0;
    int p1 = 1;
    std::vector<double> thetas;

    ToySpec spec(double theta) const { return {example, p, p1, theta}; }
};

int default_p1(ToyExample example, int p) {
    switch (example) {
        case ToyExample::Toy1: return std::max(1, p / 10);
        case ToyExample::Toy2: return 1;
        case ToyExample::Toy3: return std::max(1, p / 4);
        case ToyExample::Toy4: return std::max(3, p / 20);
    }
    return 1;
}

ToyGrid read_toy_grid(FieldReader& target, const std::string& example, int p, std::vector<double> thetas,
                      bool allow_noisy) {
    target.reject_unknown({"example", "p", "p1", "theta", "sigma"});
    ToyGrid grid;
    grid.example = toy_example_field(target, example, allow_noisy, grid.noisy);
    grid.p = target.small_integer("p", p, 1);
    grid.p1 = target.small_integer("p1", default_p1(grid.example, grid.p), 1);
    grid.thetas = target.numbers("theta", std::move(thetas));
    if (grid.noisy) grid.sigma = target.number_in("sigma", 0.5, 0.0, 1e6);
    for (double theta : grid.thetas) {
        try {
            grid.spec(theta).validate();
        } catch (const ConfigError& e) {
            target.fail("theta", e.what());
        }
    }
    return grid;
}

bool reader_uses(Algorithm algorithm, const std::string& key) {
    if (key == "rho" || key == "rho_a_over_n") return algorithm == Algorithm::MHIIT;
    if (key == "m" || key == "m_per_p") return algorithm == Algorithm::RNIIT || algorithm == Algorithm::MTIT;
    if (key == "a") return algorithm == Algorithm::CTIIT;
    if (key == "ladder") return algorithm == Algorithm::VTIIT;
    if (key == "abc_correction") return algorithm == Algorithm::PIIT;
    return true;
}

// One sampler entry: {"label", "algorithm", "h", "c_per_theta", "rho", "rho_a_over_n", "m", "m_per_p", "a",
// "ladder": {...}, "abc_correction"}.
SamplerSpec read_sampler(FieldReader& reader) {
    reader.reject_unknown({"label", "algorithm", "h", "c_per_theta", "rho", "rho_a_over_n", "m", "m_per_p", "a", "ladder",
                           "abc_correction"});
    SamplerSpec spec;
    SamplerConfig& c = spec.config;
    const std::string algorithm = reader.text("algorithm", std::nullopt);
    try {
        c.algorithm = parse_algorithm(algorithm);
    } catch (const ConfigError& e) {
        reader.fail("algorithm", e.what());
    }
    spec.label = reader.text("label", algorithm);
    if (spec.label.empty() || spec.label.find_first_of(",\"\n\r") != std::string::npos)
        reader.fail("label", "must be non-empty without commas, quotes or line breaks");

    const bool metropolis = c.algorithm == Algorithm::UninformedMH || c.algorithm == Algorithm::MHIIT ||
                            c.algorithm == Algorithm::PMH;
    c.h = reader.balancing("h", metropolis ? "min1" : "sqrt");
    if (reader.has("c_per_theta")) {
        spec.c_per_theta = reader.number("c_per_theta", std::nullopt);
        if (spec.c_per_theta < 0.0) reader.fail("c_per_theta", "must be non-negative");
    }
    switch (c.algorithm) {
        case Algorithm::MHIIT:
            if (reader.has("rho_a_over_n"))
                c.rho = RhoMode::a_over_n(reader.positive("rho_a_over_n", std::nullopt));
            else
                c.rho = RhoMode::constant(reader.number_in("rho", 0.025, 0.0, 1.0));
            break;
        case Algorithm::RNIIT:
        case Algorithm::MTIT:
            if (reader.has("m_per_p")) {
                spec.m_per_p = reader.positive("m_per_p", std::nullopt);
            } else {
                c.m = reader.integer("m", c.algorithm == Algorithm::MTIT ? 50 : 2, 1);
            }
            break;
        case Algorithm::CTIIT: c.a = reader.number_in("a", 1.0, 1e-12, 1.0); break;
        case Algorithm::VTIIT: {
            FieldReader ladder = reader.child("ladder");
            ladder.reject_unknown({"J", "delta", "method", "h_star", "adapt", "s0", "n0"});
            c.ladder.J = ladder.small_integer("J", 4, 0);
            c.ladder.delta = ladder.positive("delta", 2.0);
            const std::string method = ladder.text("method", "M2");
            try {
                c.ladder.method = parse_ladder_method(method);
            } catch (const ConfigError& e) {
                ladder.fail("method", e.what());
            }
            c.ladder.h_star = ladder.balancing("h_star", "min1");
            c.ladder.adapt = ladder.flag("adapt", true);
            c.ladder.s0 = ladder.positive("s0", 100.0);
            c.ladder.n0 = ladder.positive("n0", 100.0);
            break;
        }
        case Algorithm::PIIT: c.abc_correction = reader.flag("abc_correction", false); break;
        default: break;
    }
    for (const char* key : {"rho", "rho_a_over_n", "m", "m_per_p", "a", "ladder", "abc_correction"})
        if (reader.has(key) && !reader_uses(c.algorithm, key)) reader.fail(key, "does not apply to " + algorithm);
    if (c.h.kind() == BalancingKind::HC && spec.c_per_theta > 0.0)
        reader.fail("c_per_theta", "conflicts with an explicit hc:<c> balancing function");
    if (spec.c_per_theta > 0.0 && !(metropolis || c.h.bounded()))
        reader.fail("c_per_theta", "needs a bounded balancing function");
    try {
        SamplerConfig probe = spec.resolve(1.0, 100);
        probe.validate();
    } catch (const ConfigError& e) {
        reader.fail("algorithm", e.what());
    }
    return spec;
}

std::vector<SamplerSpec> read_samplers(const Json& document, Json& echo, const Json& defaults) {
    const Json& source = document.contains("samplers") ? document.at("samplers") : defaults;
    if (!source.is_array()) throw ConfigError("field 'samplers': expected an array of sampler objects");
    if (source.empty()) throw ConfigError("field 'samplers': at least one sampler is required");
    echo["samplers"] = Json::array();
    std::vector<SamplerSpec> specs;
    std::set<std::string> labels;
    for (std::size_t i = 0; i < source.size(); ++i) {
        echo["samplers"].push_back(Json::object());
        FieldReader reader(source[i], echo["samplers"].back(), "samplers[" + std::to_string(i) + "]");
        SamplerSpec spec = read_sampler(reader);
        if (!labels.insert(spec.label).second) reader.fail("label", "duplicate sampler label '" + spec.label + "'");
        specs.push_back(std::move(spec));
    }
    return specs;
}

Json sampler_json(const std::string& algorithm, Json extra = Json::object()) {
    Json s = Json::object();
    s["algorithm"] = algorithm;
    for (auto& item : extra.items()) s[item.key()] = item.value();
    return s;
}

void require_algorithms(const std::vector<SamplerSpec>& samplers, std::initializer_list<Algorithm> allowed,
                        const std::string& kind) {
    for (std::size_t i = 0; i < samplers.size(); ++i) {
        const Algorithm a = samplers[i].config.algorithm;
        if (std::find(allowed.begin(), allowed.end(), a) == allowed.end())
            throw ConfigError("field 'samplers[" + std::to_string(i) + "].algorithm': " + to_string(a) +
                              " is not available for " + kind + " experiments");
    }
}

}  // namespace

SamplerConfig SamplerSpec::resolve(double theta, int p) const {
    SamplerConfig c = config;
    if (c_per_theta > 0.0) c.h = BalancingFunction::hc(c_per_theta * theta);
    if (m_per_p > 0.0) c.m = static_cast<std::size_t>(std::max(1.0, std::round(m_per_p * p)));
    return c;
}

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::TvThreshold: return "tv-threshold";
        case ExperimentKind::Estimate: return "estimate";
        case ExperimentKind::Table1: return "table1";
        case ExperimentKind::AppendixAVerify: return "appendixA-verify";
        case ExperimentKind::SixMode: return "six-mode";
        case ExperimentKind::Abc: return "abc";
        case ExperimentKind::GaussianMtit: return "gaussian-mtit";
        case ExperimentKind::HittingTime: return "hitting-time";
    }
    return "?";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
    for (ExperimentKind k : {ExperimentKind::TvThreshold, ExperimentKind::Estimate, ExperimentKind::Table1,
                             ExperimentKind::AppendixAVerify, ExperimentKind::SixMode, ExperimentKind::Abc,
                             ExperimentKind::GaussianMtit, ExperimentKind::HittingTime})
        if (text == to_string(k)) return k;
    throw ConfigError("unknown experiment kind '" + text +
                      "' (expected tv-threshold, estimate, table1, appendixA-verify, six-mode, abc, gaussian-mtit or "
                      "hitting-time)");
}

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.12g", value);
    return buffer;
}

ExperimentConfig parse_config(const Json& document) {
    if (!document.is_object()) throw ConfigError("config: expected a JSON object at the top level");
    ExperimentConfig config;
    Json echo = Json::object();
    FieldReader top(document, echo, "");
    top.reject_unknown({"kind", "name", "seed", "replicates", "budget", "output", "workers", "target", "settings",
                        "samplers"});
    const std::string kind_text = top.text("kind", std::nullopt);
    try {
        config.kind = parse_experiment_kind(kind_text);
    } catch (const ConfigError& e) {
        top.fail("kind", e.what());
    }
    config.name = top.text("name", kind_text);
    if (config.name.empty() || config.name.find_first_of("/\\") != std::string::npos)
        top.fail("name", "must be a non-empty name without path separators");
    config.seed = top.integer("seed", std::nullopt);

    std::uint64_t default_replicates = 20;
    std::uint64_t default_budget = 500000;
    switch (config.kind) {
        case ExperimentKind::Table1: default_replicates = 1; default_budget = 1; break;
        case ExperimentKind::AppendixAVerify: default_replicates = 500; default_budget = kUnlimited; break;
        case ExperimentKind::Estimate: default_replicates = 10; default_budget = 100000; break;
        case ExperimentKind::Abc: default_replicates = 50; default_budget = kUnlimited; break;
        case ExperimentKind::SixMode:
        case ExperimentKind::HittingTime: default_budget = kUnlimited; break;
        default: break;
    }
    config.replicates = top.integer("replicates", default_replicates, 1);
    config.budget = top.integer("budget", default_budget, 1);
    config.output = top.text("output", config.name);
    if (config.output.empty()) top.fail("output", "must not be empty");
    config.workers = top.integer("workers", 1, 1);
    if (config.workers > 1024) top.fail("workers", "must be at most 1024");

    FieldReader target = top.child("target");
    FieldReader settings = top.child("settings");

    Json default_samplers = Json::array();
    switch (config.kind) {
        case ExperimentKind::TvThreshold: {
            const ToyGrid grid = read_toy_grid(target, "toy1", 100, {1.0, 5.0, 10.0}, true);
            settings.reject_unknown({"threshold", "initial", "initial_ones", "call_stride"});
            double threshold = 0.1;
            if (grid.example == ToyExample::Toy2) threshold = 0.2;
            if (grid.example == ToyExample::Toy3 || grid.example == ToyExample::Toy4) threshold = 0.5;
            settings.number_in("threshold", threshold, 0.0, 2.0);
            const std::string initial =
                settings.text("initial", grid.example == ToyExample::Toy2 ? "last-ones" : "zeros");
            if (initial != "zeros" && initial != "last-ones" && initial != "mode")
                settings.fail("initial", "expected zeros, last-ones or mode");
            const int ones = settings.small_integer("initial_ones", 10, 0);
            if (ones > grid.p) settings.fail("initial_ones", "exceeds p");
            settings.integer("call_stride", 100, 1);
            default_samplers = grid.noisy ? Json::array({sampler_json("p-iit"), sampler_json("p-mh")})
                                          : Json::array({sampler_json("mh"), sampler_json("naive-iit"),
                                                         sampler_json("mh-iit"),
                                                         sampler_json("rn-iit", {{"m_per_p", 0.2}})});
            config.samplers = read_samplers(document, echo, default_samplers);
            if (grid.noisy)
                require_algorithms(config.samplers, {Algorithm::PIIT, Algorithm::PMH}, "noisy-toy2 tv-threshold");
            else
                require_algorithms(config.samplers,
                                   {Algorithm::NaiveIIT, Algorithm::MHIIT, Algorithm::RNIIT, Algorithm::CTIIT,
                                    Algorithm::VTIIT, Algorithm::UninformedMH},
                                   "tv-threshold");
            break;
        }
        case ExperimentKind::Estimate: {
            read_toy_grid(target, "toy1", 3, {1.0}, false);
            settings.reject_unknown({"key", "iterations", "burn_in"});
            settings.integer("key", 0);
            settings.integer("iterations", 0);
            settings.number_in("burn_in", 0.0, 0.0, 0.99);
            default_samplers = Json::array({sampler_json("naive-iit"), sampler_json("mh-iit"),
                                            sampler_json("rn-iit", {{"m", 2}})});
            config.samplers = read_samplers(document, echo, default_samplers);
            require_algorithms(config.samplers,
                               {Algorithm::NaiveIIT, Algorithm::MHIIT, Algorithm::RNIIT, Algorithm::CTIIT,
                                Algorithm::VTIIT, Algorithm::UninformedMH},
                               "estimate");
            break;
        }
        case ExperimentKind::Table1: {
            const ToyGrid grid = read_toy_grid(target, "toy2", 5, {1.0, 2.0, 3.0}, false);
            if (grid.example != ToyExample::Toy2) target.fail("example", "table1 experiments use toy2");
            settings.reject_unknown({"c_min", "c_max", "c_step"});
            const double c_min = settings.number_in("c_min", 0.0, 0.0, 1e3);
            const double c_max = settings.number_in("c_max", 6.0, 0.0, 1e3);
            const double step = settings.positive("c_step", 0.01);
            if (c_max < c_min) settings.fail("c_max", "must be at least c_min");
            if ((c_max - c_min) / step > 1e6) settings.fail("c_step", "gives more than 1e6 grid points");
            if (document.contains("samplers")) top.fail("samplers", "table1 experiments take no samplers");
            break;
        }
        case ExperimentKind::AppendixAVerify: {
            const ToyGrid grid = read_toy_grid(target, "toy1", 4, {1.0}, false);
            if (grid.thetas.size() != 1) target.fail("theta", "appendixA-verify takes a single theta");
            settings.reject_unknown({"h", "rho_grid", "mc_rho", "mc_iterations", "indicator"});
            const BalancingFunction h = settings.balancing("h", "min1");
            if (!h.bounded()) settings.fail("h", "the mixed estimator needs a bounded balancing function");
            for (const char* key : {"rho_grid", "mc_rho"}) {
                const auto values = settings.numbers(
                    key, std::string(key) == "rho_grid" ? std::vector<double>{0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0}
                                                        : std::vector<double>{0.0, 0.5});
                for (double r : values)
                    if (r < 0.0 || r > 1.0) settings.fail(key, "rho values must lie in [0, 1]");
            }
            settings.integer("mc_iterations", 100000, 1);
            const std::string indicator = settings.text("indicator", "mode");
            if (indicator != "mode") settings.fail("indicator", "only the mode indicator is supported");
            if (document.contains("samplers")) top.fail("samplers", "appendixA-verify uses the mixed estimator only");
            break;
        }
        case ExperimentKind::SixMode: {
            target.reject_unknown({"n", "p", "data_seed", "sigma2", "g", "nu"});
            target.small_integer("n", 100, 1);
            const int p = target.small_integer("p", 200, 8);
            target.integer("data_seed", 1);
            target.positive("sigma2", 2.0);
            target.positive("g", static_cast<double>(p) * p);
            target.positive("nu", 1.0);
            settings.reject_unknown({"iterations"});
            settings.integer("iterations", 50000, 1);
            default_samplers = Json::array({sampler_json("naive-iit"), sampler_json("vt-iit")});
            config.samplers = read_samplers(document, echo, default_samplers);
            require_algorithms(config.samplers,
                               {Algorithm::NaiveIIT, Algorithm::MHIIT, Algorithm::RNIIT, Algorithm::CTIIT,
                                Algorithm::VTIIT, Algorithm::UninformedMH},
                               "six-mode");
            break;
        }
        case ExperimentKind::Abc: {
            target.reject_unknown({"a", "b", "K"});
            GeomABCSpec spec;
            spec.a = target.number("a", 0.5);
            spec.b = target.number("b", 0.4);
            spec.K = target.small_integer("K", 100, 1);
            try {
                spec.validate();
            } catch (const ConfigError& e) {
                target.fail("a", e.what());
            }
            settings.reject_unknown({"iterations", "burn_in", "initial", "equal_calls"});
            settings.integer("iterations", 10000, 1);
            settings.number_in("burn_in", 0.5, 0.0, 0.99);
            settings.integer("initial", 15, 1);
            settings.flag("equal_calls", true);
            default_samplers = Json::array({sampler_json("p-iit"), sampler_json("p-mh")});
            config.samplers = read_samplers(document, echo, default_samplers);
            require_algorithms(config.samplers, {Algorithm::PIIT, Algorithm::PMH}, "abc");
            break;
        }
        case ExperimentKind::GaussianMtit: {
            target.reject_unknown({"p", "proposal_sigma"});
            GaussianSpec spec;
            spec.p = target.small_integer("p", 10, 1);
            spec.sigma = target.number_in("proposal_sigma", 0.0, 0.0, 1e6);
            settings.reject_unknown({"start", "burn_in", "radius_factor"});
            settings.number("start", 10.0);
            settings.number_in("burn_in", 0.5, 0.0, 0.99);
            settings.positive("radius_factor", 2.0);
            default_samplers = Json::array({sampler_json("mt-it", {{"m", 50}})});
            config.samplers = read_samplers(document, echo, default_samplers);
            require_algorithms(config.samplers, {Algorithm::MTIT}, "gaussian-mtit");
            break;
        }
        case ExperimentKind::HittingTime: {
            const ToyGrid grid = read_toy_grid(target, "toy4", 200, {6.0}, false);
            if (grid.example != ToyExample::Toy3 && grid.example != ToyExample::Toy4)
                target.fail("example", "hitting-time experiments need a two-mode target (toy3 or toy4)");
            settings.reject_unknown({"max_iterations"});
            settings.integer("max_iterations", 10000, 1);
            for (double a : {0.05, 0.2, 0.4, 0.6, 0.8, 1.0}) {
                std::ostringstream label;
                label << "ct-iit-a" << a;
                default_samplers.push_back(sampler_json("ct-iit", {{"label", label.str()}, {"a", a}}));
            }
            config.samplers = read_samplers(document, echo, default_samplers);
            require_algorithms(config.samplers,
                               {Algorithm::NaiveIIT, Algorithm::MHIIT, Algorithm::RNIIT, Algorithm::CTIIT,
                                Algorithm::VTIIT, Algorithm::UninformedMH},
                               "hitting-time");
            break;
        }
    }
    config.target = echo["target"];
    config.settings = echo["settings"];
    config.echo = echo;
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    Json document;
    try {
        document = Json::parse(text);
    } catch (const Json::parse_error& e) {
        const std::size_t offset = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset ? offset - 1 : 0), '\n');
        throw ConfigError("config line " + std::to_string(line) + ": " + e.what());
    }
    return parse_config(document);
}

namespace {

// Runs fn(0..count-1) on up to `workers` threads; each index writes only its own slot.
template <class Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex guard;
    std::exception_ptr failure;
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers, count); ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(guard);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

std::uint64_t group_seed(std::uint64_t master, std::size_t sampler, std::size_t theta, std::size_t replicate) {
    return derive_seed(derive_seed(derive_seed(master, sampler + 1), theta + 1), replicate);
}

ToyGrid toy_grid_of(const Json& target) {
    ToyGrid grid;
    const std::string name = target.at("example").get<std::string>();
    grid.noisy = name == "noisy-toy2";
    grid.example = grid.noisy ? ToyExample::Toy2 : parse_toy_example(name);
    grid.p = target.at("p").get<int>();
    grid.p1 = target.at("p1").get<int>();
    grid.thetas = target.at("theta").get<std::vector<double>>();
    if (grid.noisy) grid.sigma = target.at("sigma").get<double>();
    return grid;
}

State initial_state(const std::string& kind, int ones, const ToyTarget& target) {
    const int p = target.spec().p;
    if (kind == "mode") return target.modes().front();
    State x(static_cast<std::size_t>(p), 0);
    if (kind == "last-ones")
        for (int i = p - ones; i < p; ++i) x[static_cast<std::size_t>(i)] = 1;
    return x;
}

Json quartile_json(std::vector<double> values) {
    const Quartiles q = quartiles(std::move(values));
    return Json{{"q1", q.q1}, {"median", q.median}, {"q3", q.q3}};
}

std::string u64(std::uint64_t v) { return std::to_string(v); }

struct Task {
    std::size_t sampler = 0;
    std::size_t theta = 0;
    std::size_t replicate = 0;
    std::uint64_t seed = 0;
};

std::vector<Task> make_tasks(const ExperimentConfig& config, std::size_t theta_count) {
    std::vector<Task> tasks;
    for (std::size_t t = 0; t < theta_count; ++t)
        for (std::size_t s = 0; s < config.samplers.size(); ++s)
            for (std::size_t r = 0; r < config.replicates; ++r)
                tasks.push_back({s, t, r, group_seed(config.seed, s, t, r)});
    return tasks;
}

Json seed_list(const ExperimentConfig& config, const std::vector<Task>& tasks, const std::vector<double>& thetas) {
    Json seeds = Json::array();
    for (const Task& task : tasks) {
        Json entry{{"sampler", config.samplers[task.sampler].label}, {"replicate", task.replicate}, {"seed", task.seed}};
        if (!thetas.empty()) entry["theta"] = thetas[task.theta];
        seeds.push_back(entry);
    }
    return seeds;
}

ExperimentResult run_tv_threshold(const ExperimentConfig& config) {
    const ToyGrid grid = toy_grid_of(config.target);
    const double threshold = config.settings.at("threshold").get<double>();
    const std::string initial = config.settings.at("initial").get<std::string>();
    const int ones = config.settings.at("initial_ones").get<int>();
    const auto stride = config.settings.at("call_stride").get<std::uint64_t>();
    const std::vector<Task> tasks = make_tasks(config, grid.thetas.size());
    std::vector<ThresholdResult> results(tasks.size());

    parallel_for(tasks.size(), config.workers, [&](std::size_t i) {
        const Task& task = tasks[i];
        const double theta = grid.thetas[task.theta];
        SamplerConfig run = config.samplers[task.sampler].resolve(theta, grid.p);
        run.seed = task.seed;
        if (grid.noisy) {
            const NoisyToy2Target target(grid.p, theta, grid.sigma);
            const State x0 = initial_state(initial, ones, target.exact());
            results[i] = calls_to_threshold(target, target.exact(), run, x0, threshold, config.budget, stride);
        } else {
            const ToyTarget target(grid.spec(theta));
            const State x0 = initial_state(initial, ones, target);
            results[i] = calls_to_threshold(target, target, run, x0, threshold, config.budget, stride);
        }
    });

    ExperimentResult out;
    out.header = {"experiment", "theta", "p", "sampler", "replicate", "seed", "calls_to_threshold", "censored",
                  "final_tv", "calls_spent"};
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Task& task = tasks[i];
        const ThresholdResult& r = results[i];
        out.rows.push_back({config.name, format_number(grid.thetas[task.theta]), std::to_string(grid.p),
                            config.samplers[task.sampler].label, std::to_string(task.replicate), u64(task.seed),
                            u64(r.calls_to_threshold), r.censored ? "1" : "0", format_number(r.final_distance),
                            u64(r.calls_spent)});
        out.total_calls += r.calls_spent;
    }
    Json groups = Json::array();
    for (std::size_t t = 0; t < grid.thetas.size(); ++t) {
        for (std::size_t s = 0; s < config.samplers.size(); ++s) {
            std::vector<ThresholdResult> subset;
            std::uint64_t calls = 0;
            for (std::size_t i = 0; i < tasks.size(); ++i)
                if (tasks[i].theta == t && tasks[i].sampler == s) {
                    subset.push_back(results[i]);
                    calls += results[i].calls_spent;
                }
            const ThresholdSummary summary = summarize(subset);
            groups.push_back({{"theta", grid.thetas[t]},
                              {"sampler", config.samplers[s].label},
                              {"replicates", summary.replicates},
                              {"censored", summary.censored},
                              {"calls_to_threshold",
                               {{"q1", summary.calls.q1}, {"median", summary.calls.median}, {"q3", summary.calls.q3}}},
                              {"total_calls", calls}});
        }
    }
    out.summary = {{"groups", groups}};
    out.provenance["seeds"] = seed_list(config, tasks, grid.thetas);
    return out;
}

ExperimentResult run_estimate(const ExperimentConfig& config) {
    const ToyGrid grid = toy_grid_of(config.target);
    const auto key = config.settings.at("key").get<std::int64_t>();
    const auto iterations = config.settings.at("iterations").get<std::uint64_t>();
    const double burn_in = config.settings.at("burn_in").get<double>();
    const std::vector<Task> tasks = make_tasks(config, grid.thetas.size());
    struct Outcome {
        EstimatorResult estimate;
        std::uint64_t calls = 0;
    };
    std::vector<Outcome> outcomes(tasks.size());
    parallel_for(tasks.size(), config.workers, [&](std::size_t i) {
        const Task& task = tasks[i];
        const ToyTarget target(grid.spec(grid.thetas[task.theta]));
        SamplerConfig run = config.samplers[task.sampler].resolve(target.spec().theta, grid.p);
        run.seed = task.seed;
        run.max_calls = config.budget;
        run.T = iterations > 0 ? iterations : kUnlimited;
        const WeightedSampleStream stream = run_sampler(target, run, State(static_cast<std::size_t>(grid.p), 0));
        outcomes[i].estimate = self_normalized_estimate(
            stream, [&](const State& x) { return target.summary_key(x) == key ? 1.0 : 0.0; }, burn_in);
        outcomes[i].calls = stream.stats.calls;
    });
    ExperimentResult out;
    out.header = {"experiment", "theta", "p", "sampler", "replicate", "seed", "estimate", "exact", "abs_error",
                  "effective_samples", "calls"};
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> errors, values;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Task& task = tasks[i];
        const double exact = toy_pushforward_exact(grid.spec(grid.thetas[task.theta])).probability_of(key);
        const Outcome& o = outcomes[i];
        out.rows.push_back({config.name, format_number(grid.thetas[task.theta]), std::to_string(grid.p),
                            config.samplers[task.sampler].label, std::to_string(task.replicate), u64(task.seed),
                            format_number(o.estimate.value), format_number(exact),
                            format_number(std::abs(o.estimate.value - exact)),
                            format_number(o.estimate.effective_samples), u64(o.calls)});
        errors[{task.theta, task.sampler}].push_back(std::abs(o.estimate.value - exact));
        values[{task.theta, task.sampler}].push_back(o.estimate.value);
        out.total_calls += o.calls;
    }
    Json groups = Json::array();
    for (std::size_t t = 0; t < grid.thetas.size(); ++t)
        for (std::size_t s = 0; s < config.samplers.size(); ++s) {
            const auto& v = values[{t, s}];
            const auto& e = errors[{t, s}];
            Json g{{"theta", grid.thetas[t]},
                   {"sampler", config.samplers[s].label},
                   {"exact", toy_pushforward_exact(grid.spec(grid.thetas[t])).probability_of(key)},
                   {"mean_estimate", mean(v)},
                   {"max_abs_error", *std::max_element(e.begin(), e.end())}};
            if (v.size() > 1) g["sd_estimate"] = standard_deviation(v);
            groups.push_back(g);
        }
    out.summary = {{"groups", groups}};
    out.provenance["seeds"] = seed_list(config, tasks, grid.thetas);
    return out;
}

ExperimentResult run_table1(const ExperimentConfig& config) {
    const ToyGrid grid = toy_grid_of(config.target);
    const double c_min = config.settings.at("c_min").get<double>();
    const double c_max = config.settings.at("c_max").get<double>();
    const double step = config.settings.at("c_step").get<double>();
    std::vector<std::vector<ComplexityRow>> rows(grid.thetas.size());
    parallel_for(grid.thetas.size(), config.workers, [&](std::size_t t) {
        try {
            rows[t] = complexity_grid(grid.p, grid.thetas[t], c_min, c_max, step);
        } catch (const CapacityError& e) {
            throw CapacityError(std::string(e.what()) + " (toy2 with p=" + std::to_string(grid.p) + ")");
        }
    });
    ExperimentResult out;
    out.header = {"theta", "c", "gap", "comp_rho0", "comp_rho1", "comp_rho0.5"};
    Json optima = Json::array();
    for (std::size_t t = 0; t < rows.size(); ++t) {
        for (const ComplexityRow& r : rows[t])
            out.rows.push_back({format_number(r.theta), format_number(r.c), format_number(r.gap),
                                format_number(r.comp_rho0), format_number(r.comp_rho1), format_number(r.comp_rho_half)});
        const ComplexityOptima o = grid_optima(rows[t]);
        const auto point = [](const GridOptimum& g) { return Json{{"value", g.value}, {"c", g.c}}; };
        optima.push_back({{"theta", o.theta},
                          {"max_gap", point(o.max_gap)},
                          {"min_comp_rho0", point(o.min_comp_rho0)},
                          {"min_comp_rho1", point(o.min_comp_rho1)},
                          {"min_comp_rho0.5", point(o.min_comp_rho_half)}});
    }
    out.summary = {{"optima", optima}};
    return out;
}

struct AppendixAModel {
    ToyTarget target;
    ExactModel model;
    Eigen::VectorXd f;
};

AppendixAModel appendix_a_model(const ExperimentConfig& config) {
    const ToyGrid grid = toy_grid_of(config.target);
    const BalancingFunction h = BalancingFunction::parse(config.settings.at("h").get<std::string>());
    ToyTarget target(grid.spec(grid.thetas.front()));
    ExactModel model;
    try {
        model = build_exact_model(target, h, State(static_cast<std::size_t>(grid.p), 0));
    } catch (const CapacityError& e) {
        throw CapacityError(std::string(e.what()) + " (" + to_string(grid.example) + " with p=" + std::to_string(grid.p) +
                            ")");
    }
    Eigen::VectorXd f(static_cast<Eigen::Index>(model.size()));
    for (std::size_t i = 0; i < model.size(); ++i)
        f(static_cast<Eigen::Index>(i)) = model.states[i] == target.modes().front() ? 1.0 : 0.0;
    f = center(model, f);
    return {std::move(target), std::move(model), std::move(f)};
}

// sqrt(T) f_hat_T over a run started from pi_h, dropping the initial sample.
double scaled_estimate(const AppendixAModel& m, const BalancingFunction& h, double rho, std::uint64_t iterations,
                       std::uint64_t budget, std::uint64_t start_seed, std::uint64_t chain_seed, std::uint64_t& calls) {
    Rng rng(start_seed);
    std::vector<double> log_pi_h(m.model.size());
    for (std::size_t i = 0; i < m.model.size(); ++i) log_pi_h[i] = std::log(m.model.pi_h(static_cast<Eigen::Index>(i)));
    const State x0 = m.model.states[sample_categorical_log(log_pi_h, rng)];
    SamplerConfig run;
    run.algorithm = Algorithm::MHIIT;
    run.h = h;
    run.rho = RhoMode::constant(rho);
    run.T = iterations;
    run.seed = chain_seed;
    run.max_calls = budget;
    double num = 0.0, den = 0.0;
    std::uint64_t n = 0;
    const RunStats stats = run_mh_iit(m.target, run, x0, [&](const SampleView& s) {
        if (n++ == 0) return true;
        const double w = s.log_weight.is_zero() ? 0.0 : std::exp(s.log_weight.log());
        num += w * m.f(static_cast<Eigen::Index>(m.model.index_of(s.state)));
        den += w;
        return true;
    });
    calls = stats.calls;
    return std::sqrt(static_cast<double>(iterations)) * num / den;
}

ExperimentResult run_appendix_a(const ExperimentConfig& config) {
    const AppendixAModel m = appendix_a_model(config);
    const BalancingFunction h = BalancingFunction::parse(config.settings.at("h").get<std::string>());
    const auto grid = config.settings.at("rho_grid").get<std::vector<double>>();
    const auto mc_rho = config.settings.at("mc_rho").get<std::vector<double>>();
    const auto iterations = config.settings.at("mc_iterations").get<std::uint64_t>();
    const AppendixAReport report = verify_appendix_a(m.model, m.f, grid);

    std::vector<Task> tasks;
    for (std::size_t k = 0; k < mc_rho.size(); ++k)
        for (std::size_t r = 0; r < config.replicates; ++r) tasks.push_back({0, k, r, group_seed(config.seed, 0, k, r)});
    std::vector<double> values(tasks.size());
    std::vector<std::uint64_t> calls(tasks.size());
    parallel_for(tasks.size(), config.workers, [&](std::size_t i) {
        const Task& task = tasks[i];
        values[i] = scaled_estimate(m, h, mc_rho[task.theta], iterations, config.budget, derive_seed(task.seed, 0),
                                    derive_seed(task.seed, 1), calls[i]);
    });

    ExperimentResult out;
    out.header = {"rho", "sigma2_oracle", "prop1_bound", "ct_bound", "mc_variance", "mc_ratio", "mc_runs"};
    std::vector<double> all_rho = grid;
    for (double r : mc_rho)
        if (std::find(all_rho.begin(), all_rho.end(), r) == all_rho.end()) all_rho.push_back(r);
    Json mc = Json::array();
    for (double rho : all_rho) {
        const std::vector<double> per_state(m.model.size(), rho);
        const double sigma2 = asymptotic_variance_oracle(m.model, mixed_weight_kernel(m.model, per_state), m.f);
        const auto entry = std::find_if(report.entries.begin(), report.entries.end(),
                                        [&](const AppendixAEntry& e) { return e.rho == rho; });
        std::vector<std::string> row{format_number(rho), format_number(sigma2),
                                     entry != report.entries.end() ? format_number(entry->prop1_bound) : "",
                                     format_number(report.ct_bound), "", "", "0"};
        const auto k = std::find(mc_rho.begin(), mc_rho.end(), rho);
        if (k != mc_rho.end()) {
            const auto idx = static_cast<std::size_t>(k - mc_rho.begin());
            std::vector<double> v;
            for (std::size_t i = 0; i < tasks.size(); ++i)
                if (tasks[i].theta == idx) v.push_back(values[i]);
            if (v.size() > 1) {
                const double sd = standard_deviation(v);
                row[4] = format_number(sd * sd);
                row[5] = format_number(sd * sd / sigma2);
                mc.push_back({{"rho", rho}, {"oracle", sigma2}, {"empirical", sd * sd}, {"ratio", sd * sd / sigma2}});
            }
            row[6] = std::to_string(v.size());
        }
        out.rows.push_back(row);
    }
    for (std::uint64_t c : calls) out.total_calls += c;
    out.summary = {{"states", m.model.size()},
                   {"sigma2_rho1", report.sigma2_exact},
                   {"sigma2_rho0", report.sigma2_mh},
                   {"gamma", report.gamma},
                   {"gap", report.gap},
                   {"gap_ct", report.gap_ct},
                   {"ct_bound", report.ct_bound},
                   {"inequality_chain_holds", report.chain_holds},
                   {"prop1_bound_holds", report.prop1_holds},
                   {"ct_bound_holds", report.ct_bound_holds},
                   {"monte_carlo", mc}};
    out.provenance["seeds"] = Json::array();
    for (const Task& task : tasks)
        out.provenance["seeds"].push_back(
            {{"rho", mc_rho[task.theta]}, {"replicate", task.replicate}, {"seed", task.seed}});
    return out;
}

VarSelDataset six_mode_dataset(const Json& target) {
    VarSelHyper hyper;
    hyper.g = target.at("g").get<double>();
    hyper.nu = target.at("nu").get<double>();
    hyper.sigma2 = target.at("sigma2").get<double>();
    return generate_varsel_data(DataRecipe::SixMode, target.at("n").get<int>(), target.at("p").get<int>(),
                                target.at("data_seed").get<std::uint64_t>(), hyper);
}

ExperimentResult run_six_mode(const ExperimentConfig& config) {
    const VarSelDataset data = six_mode_dataset(config.target);
    const VarSelTarget target(data.model);
    const int p = data.model.p();
    std::vector<State> modes;
    for (const auto& columns : six_mode_sets()) modes.push_back(subset_state(p, columns));
    const auto iterations = config.settings.at("iterations").get<std::uint64_t>();
    const std::vector<Task> tasks = make_tasks(config, 1);
    std::vector<std::string> visited(tasks.size());
    std::vector<std::uint64_t> calls(tasks.size());
    parallel_for(tasks.size(), config.workers, [&](std::size_t i) {
        SamplerConfig run = config.samplers[tasks[i].sampler].resolve(1.0, p);
        run.seed = tasks[i].seed;
        run.T = iterations;
        run.max_calls = config.budget;
        std::string mask(modes.size(), '0');
        const RunStats stats = run_sampler(target, run, State(static_cast<std::size_t>(p), 0), [&](const SampleView& s) {
            for (std::size_t k = 0; k < modes.size(); ++k)
                if (s.state == modes[k]) mask[k] = '1';
            return true;
        });
        visited[i] = mask;
        calls[i] = stats.calls;
    });
    ExperimentResult out;
    out.header = {"experiment", "sampler", "replicate", "seed", "modes_visited", "visited_mask", "calls"};
    std::vector<std::vector<int>> histogram(config.samplers.size(), std::vector<int>(modes.size() + 1, 0));
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto count = static_cast<std::size_t>(std::count(visited[i].begin(), visited[i].end(), '1'));
        histogram[tasks[i].sampler][count]++;
        out.rows.push_back({config.name, config.samplers[tasks[i].sampler].label, std::to_string(tasks[i].replicate),
                            u64(tasks[i].seed), std::to_string(count), "m" + visited[i], u64(calls[i])});
        out.total_calls += calls[i];
    }
    Json groups = Json::array();
    for (std::size_t s = 0; s < config.samplers.size(); ++s) {
        const double runs = static_cast<double>(config.replicates);
        groups.push_back({{"sampler", config.samplers[s].label},
                          {"runs_by_modes_visited", histogram[s]},
                          {"fraction_all_six", histogram[s][modes.size()] / runs},
                          {"fraction_exactly_three", histogram[s][3] / runs}});
    }
    Json mode_log_pi = Json::array();
    for (const State& m : modes) mode_log_pi.push_back(target.log_pi(m));
    out.summary = {{"mode_log_posteriors", mode_log_pi}, {"groups", groups}};
    out.provenance["seeds"] = seed_list(config, tasks, {});
    return out;
}

ExperimentResult run_abc(const ExperimentConfig& config) {
    GeomABCSpec spec;
    spec.a = config.target.at("a").get<double>();
    spec.b = config.target.at("b").get<double>();
    spec.K = config.target.at("K").get<int>();
    const GeomABCTarget target(spec);
    const auto iterations = config.settings.at("iterations").get<std::uint64_t>();
    const double burn_in = config.settings.at("burn_in").get<double>();
    const State x0{config.settings.at("initial").get<int>()};
    const bool equal_calls = config.settings.at("equal_calls").get<bool>();
    const std::vector<Task> tasks = make_tasks(config, 1);
    const std::size_t S = config.samplers.size();
    std::vector<double> estimates(tasks.size());
    std::vector<std::uint64_t> calls(tasks.size());
    // One work item per replicate so later samplers can match the first sampler's calls.
    parallel_for(config.replicates, config.workers, [&](std::size_t r) {
        std::uint64_t reference_calls = 0;
        for (std::size_t s = 0; s < S; ++s) {
            const std::size_t i = s * config.replicates + r;
            SamplerConfig run = config.samplers[s].resolve(1.0, 1);
            run.seed = tasks[i].seed;
            run.T = iterations;
            run.max_calls = config.budget;
            if (equal_calls && s > 0) {
                run.T = kUnlimited;
                run.max_calls = std::max<std::uint64_t>(reference_calls, 1);
            }
            const WeightedSampleStream stream = run.algorithm == Algorithm::PIIT ? run_p_iit(target, run, x0)
                                                                                 : run_p_mh(target, run, x0);
            estimates[i] =
                self_normalized_estimate(stream, [](const State& x) { return static_cast<double>(x[0]); }, burn_in).value;
            calls[i] = stream.stats.calls;
            if (s == 0) reference_calls = calls[i];
        }
    });
    ExperimentResult out;
    out.header = {"experiment", "sampler", "replicate", "seed", "estimate", "calls"};
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        out.rows.push_back({config.name, config.samplers[tasks[i].sampler].label, std::to_string(tasks[i].replicate),
                            u64(tasks[i].seed), format_number(estimates[i]), u64(calls[i])});
        out.total_calls += calls[i];
    }
    Json groups = Json::array();
    for (std::size_t s = 0; s < S; ++s) {
        std::vector<double> v(estimates.begin() + static_cast<std::ptrdiff_t>(s * config.replicates),
                              estimates.begin() + static_cast<std::ptrdiff_t>((s + 1) * config.replicates));
        std::uint64_t total = 0;
        for (std::size_t r = 0; r < config.replicates; ++r) total += calls[s * config.replicates + r];
        Json g{{"sampler", config.samplers[s].label}, {"mean_estimate", mean(v)}, {"total_calls", total}};
        if (v.size() > 1) g["sd_estimate"] = standard_deviation(v);
        groups.push_back(g);
    }
    out.summary = {{"posterior_mean", target.posterior_mean()}, {"groups", groups}};
    out.provenance["seeds"] = seed_list(config, tasks, {});
    return out;
}

ExperimentResult run_gaussian(const ExperimentConfig& config) {
    GaussianSpec spec;
    spec.p = config.target.at("p").get<int>();
    spec.sigma = config.target.at("proposal_sigma").get<double>();
    const GaussianTarget target(spec);
    const GaussianRandomWalk kernel(spec.proposal_sigma());
    const double start = config.settings.at("start").get<double>();
    const double burn_in = config.settings.at("burn_in").get<double>();
    const double radius = config.settings.at("radius_factor").get<double>() * std::sqrt(static_cast<double>(spec.p));
    const std::vector<Task> tasks = make_tasks(config, 1);
    struct Outcome {
        double estimate = 0.0;
        std::uint64_t calls = 0;
        std::uint64_t calls_to_radius = 0;
        bool reached = false;
    };
    std::vector<Outcome> outcomes(tasks.size());
    parallel_for(tasks.size(), config.workers, [&](std::size_t i) {
        SamplerConfig run = config.samplers[tasks[i].sampler].resolve(1.0, spec.p);
        run.seed = tasks[i].seed;
        run.T = kUnlimited;
        run.max_calls = config.budget;
        std::vector<double> norms;
        std::vector<LogWeight> weights;
        Outcome& o = outcomes[i];
        const RunStats stats = run_mt_it(target, kernel, run, Point(static_cast<std::size_t>(spec.p), start),
                                         [&](const PointView& v) {
                                             double s = 0.0;
                                             for (double z : v.point) s += z * z;
                                             norms.push_back(s);
                                             weights.push_back(v.log_weight);
                                             if (!o.reached && std::sqrt(s) < radius) {
                                                 o.reached = true;
                                                 o.calls_to_radius = v.calls;
                                             }
                                             return true;
                                         });
        const auto skip = static_cast<std::size_t>(std::floor(burn_in * static_cast<double>(norms.size())));
        o.estimate = self_normalized_estimate(std::span<const LogWeight>(weights).subspan(skip),
                                              std::span<const double>(norms).subspan(skip))
                         .value;
        o.calls = stats.calls;
        if (!o.reached) o.calls_to_radius = stats.calls;
    });
    ExperimentResult out;
    out.header = {"experiment", "sampler", "replicate", "seed", "estimate", "calls", "calls_to_radius", "reached"};
    Json groups = Json::array();
    for (std::size_t s = 0; s < config.samplers.size(); ++s) {
        std::vector<double> est, hit;
        std::size_t reached = 0;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (tasks[i].sampler != s) continue;
            const Outcome& o = outcomes[i];
            out.rows.push_back({config.name, config.samplers[s].label, std::to_string(tasks[i].replicate),
                                u64(tasks[i].seed), format_number(o.estimate), u64(o.calls), u64(o.calls_to_radius),
                                o.reached ? "1" : "0"});
            out.total_calls += o.calls;
            est.push_back(o.estimate);
            hit.push_back(static_cast<double>(o.calls_to_radius));
            reached += o.reached ? 1 : 0;
        }
        Json g{{"sampler", config.samplers[s].label},
               {"mean_estimate", mean(est)},
               {"relative_error", std::abs(mean(est) - spec.p) / spec.p},
               {"mean_calls_to_radius", mean(hit)},
               {"reached", reached}};
        if (est.size() > 1) g["sd_estimate"] = standard_deviation(est);
        groups.push_back(g);
    }
    out.summary = {{"exact_second_moment", spec.p}, {"radius", radius}, {"groups", groups}};
    out.provenance["seeds"] = seed_list(config, tasks, {});
    return out;
}

ExperimentResult run_hitting_time(const ExperimentConfig& config) {
    const ToyGrid grid = toy_grid_of(config.target);
    const auto max_iterations = config.settings.at("max_iterations").get<std::uint64_t>();
    const std::vector<Task> tasks = make_tasks(config, grid.thetas.size());
    struct Outcome {
        std::uint64_t iterations = 0;
        bool censored = true;
        std::uint64_t calls = 0;
    };
    std::vector<Outcome> outcomes(tasks.size());
    parallel_for(tasks.size(), config.workers, [&](std::size_t i) {
        const ToyTarget target(grid.spec(grid.thetas[tasks[i].theta]));
        SamplerConfig run = config.samplers[tasks[i].sampler].resolve(target.spec().theta, grid.p);
        run.seed = tasks[i].seed;
        run.T = max_iterations;
        run.max_calls = config.budget;
        const State& goal = target.modes()[1];
        Outcome& o = outcomes[i];
        std::uint64_t n = 0;
        const RunStats stats = run_sampler(target, run, target.modes()[0], [&](const SampleView& s) {
            if (s.state == goal) {
                o.censored = false;
                return false;
            }
            ++n;
            return true;
        });
        o.iterations = o.censored ? max_iterations : n;
        o.calls = stats.calls;
    });
    ExperimentResult out;
    out.header = {"experiment", "theta", "p", "sampler", "replicate", "seed", "iterations", "censored", "calls"};
    Json groups = Json::array();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Outcome& o = outcomes[i];
        out.rows.push_back({config.name, format_number(grid.thetas[tasks[i].theta]), std::to_string(grid.p),
                            config.samplers[tasks[i].sampler].label, std::to_string(tasks[i].replicate),
                            u64(tasks[i].seed), u64(o.iterations), o.censored ? "1" : "0", u64(o.calls)});
        out.total_calls += o.calls;
    }
    for (std::size_t t = 0; t < grid.thetas.size(); ++t)
        for (std::size_t s = 0; s < config.samplers.size(); ++s) {
            std::vector<double> its;
            std::size_t censored = 0;
            for (std::size_t i = 0; i < tasks.size(); ++i)
                if (tasks[i].theta == t && tasks[i].sampler == s) {
                    its.push_back(static_cast<double>(outcomes[i].iterations));
                    censored += outcomes[i].censored ? 1 : 0;
                }
            groups.push_back({{"theta", grid.thetas[t]},
                              {"sampler", config.samplers[s].label},
                              {"censored", censored},
                              {"iterations", quartile_json(its)}});
        }
    out.summary = {{"groups", groups}};
    out.provenance["seeds"] = seed_list(config, tasks, grid.thetas);
    return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    ExperimentResult out;
    switch (config.kind) {
        case ExperimentKind::TvThreshold: out = run_tv_threshold(config); break;
        case ExperimentKind::Estimate: out = run_estimate(config); break;
        case ExperimentKind::Table1: out = run_table1(config); break;
        case ExperimentKind::AppendixAVerify: out = run_appendix_a(config); break;
        case ExperimentKind::SixMode: out = run_six_mode(config); break;
        case ExperimentKind::Abc: out = run_abc(config); break;
        case ExperimentKind::GaussianMtit: out = run_gaussian(config); break;
        case ExperimentKind::HittingTime: out = run_hitting_time(config); break;
    }
    Json summary = Json::object();
    summary["experiment"] = config.name;
    summary["kind"] = to_string(config.kind);
    summary["rows"] = out.rows.size();
    summary["total_calls"] = out.total_calls;
    for (auto& item : out.summary.items()) summary[item.key()] = item.value();
    out.summary = summary;

    Json provenance = Json::object();
    provenance["toolkit_version"] = kToolkitVersion;
    provenance["config"] = config.echo;
    provenance["master_seed"] = config.seed;
    provenance["csv_columns"] = out.header;
    provenance["seeds"] = out.provenance.contains("seeds") ? out.provenance["seeds"] : Json::array();
    out.provenance = provenance;
    return out;
}

Json analyze_experiment(const ExperimentConfig& config) {
    Json report = Json::object();
    report["experiment"] = config.name;
    report["kind"] = to_string(config.kind);
    report["config"] = config.echo;
    switch (config.kind) {
        case ExperimentKind::TvThreshold:
        case ExperimentKind::Estimate:
        case ExperimentKind::HittingTime: {
            const ToyGrid grid = toy_grid_of(config.target);
            Json laws = Json::array();
            for (double theta : grid.thetas) {
                const PushForward law = toy_pushforward_exact(grid.spec(theta));
                std::size_t peak = 0;
                for (std::size_t k = 1; k < law.size(); ++k)
                    if (law.probabilities()[k] > law.probabilities()[peak]) peak = k;
                laws.push_back({{"theta", theta},
                                {"support_size", law.size()},
                                {"modal_key", law.keys()[peak]},
                                {"modal_probability", law.probabilities()[peak]}});
            }
            report["pushforward"] = laws;
            if (config.kind == ExperimentKind::Estimate) {
                const auto key = config.settings.at("key").get<std::int64_t>();
                Json exact = Json::array();
                for (double theta : grid.thetas)
                    exact.push_back({{"theta", theta}, {"value", toy_pushforward_exact(grid.spec(theta)).probability_of(key)}});
                report["exact"] = exact;
            }
            break;
        }
        case ExperimentKind::Table1: {
            const ExperimentResult r = run_table1(config);
            report["optima"] = r.summary.at("optima");
            break;
        }
        case ExperimentKind::AppendixAVerify: {
            const AppendixAModel m = appendix_a_model(config);
            const auto grid = config.settings.at("rho_grid").get<std::vector<double>>();
            const AppendixAReport a = verify_appendix_a(m.model, m.f, grid);
            Json entries = Json::array();
            for (const AppendixAEntry& e : a.entries)
                entries.push_back({{"rho", e.rho}, {"sigma2", e.sigma2}, {"prop1_bound", e.prop1_bound}});
            report["entries"] = entries;
            report["gamma"] = a.gamma;
            report["ct_bound"] = a.ct_bound;
            report["passed"] = a.passed();
            break;
        }
        case ExperimentKind::SixMode: {
            const VarSelDataset data = six_mode_dataset(config.target);
            const VarSelTarget target(data.model);
            Json modes = Json::array();
            for (const auto& columns : six_mode_sets())
                modes.push_back({{"columns", columns}, {"log_posterior", target.log_pi(subset_state(data.model.p(), columns))}});
            report["modes"] = modes;
            report["planted_modes_are_local_maxima"] = planted_modes_are_local_maxima(data.model);
            break;
        }
        case ExperimentKind::Abc: {
            GeomABCSpec spec{config.target.at("a").get<double>(), config.target.at("b").get<double>(),
                             config.target.at("K").get<int>()};
            const GeomABCTarget target(spec);
            report["posterior_mean"] = target.posterior_mean();
            report["nonzero_neighbor_probability_at_initial"] =
                target.nonzero_neighbor_probability(config.settings.at("initial").get<int>());
            break;
        }
        case ExperimentKind::GaussianMtit: {
            GaussianSpec spec;
            spec.p = config.target.at("p").get<int>();
            spec.sigma = config.target.at("proposal_sigma").get<double>();
            report["exact_second_moment"] = spec.p;
            report["proposal_sigma"] = spec.proposal_sigma();
            break;
        }
    }
    return report;
}

std::filesystem::path resolve_output_directory(const std::string& output) {
    const std::filesystem::path path(output);
    if (path.is_absolute()) return path;
    const char* root = std::getenv(kOutputDirVariable);
    const std::filesystem::path base = root && *root ? std::filesystem::path(root) : std::filesystem::path("results");
    return base / path;
}

std::string to_csv(const ExperimentResult& result) {
    std::string text;
    const auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text += ',';
            text += cells[i];
        }
        text += '\n';
    };
    line(result.header);
    for (const auto& row : result.rows) line(row);
    return text;
}

std::filesystem::path write_artifacts(const ExperimentResult& result, const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    const auto write = [&](const char* name, const std::string& content) {
        std::ofstream out(directory / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (directory / name).string());
        out << content;
    };
    write("results.csv", to_csv(result));
    write("summary.json", result.summary.dump(2) + "\n");
    write("provenance.json", result.provenance.dump(2) + "\n");
    return directory;
}

namespace {

Json tv_recipe(const std::string& name, const std::string& example, int p, int p1, Json samplers) {
    Json target{{"example", example}, {"p", p}};
    if (p1 > 0) target["p1"] = p1;
    target["theta"] = Json::array({1.0, 5.0, 10.0});
    return {{"kind", "tv-threshold"}, {"name", name},         {"seed", 2024},        {"replicates", 20},
            {"budget", 500000},       {"target", target},     {"samplers", samplers}};
}

Json figure_samplers(bool with_hc) {
    Json s = Json::array();
    s.push_back(sampler_json("mh", {{"label", "MH"}, {"h", "min1"}}));
    s.push_back(sampler_json("naive-iit", {{"label", "IIT"}, {"h", "sqrt"}}));
    s.push_back(sampler_json("mh-iit", {{"label", with_hc ? "MH-IIT-1" : "MH-IIT"}, {"h", "min1"}, {"rho", 0.025}}));
    if (with_hc) s.push_back(sampler_json("mh-iit", {{"label", "MH-IIT-2"}, {"c_per_theta", 2.0}, {"rho", 0.025}}));
    s.push_back(sampler_json("rn-iit", {{"label", "RN-IIT"}, {"h", "sqrt"}, {"m_per_p", 0.2}}));
    return s;
}

std::vector<Recipe> build_recipes() {
    std::vector<Recipe> list;
    list.push_back({"table1", "spectral-gap and complexity optima of MH-IIT with HC(c)",
                    "toy2 p=5, theta=1,2,3, c in [0,6] step 0.01; exact computation",
                    {{"kind", "table1"},
                     {"name", "table1"},
                     {"seed", 0},
                     {"target", {{"example", "toy2"}, {"p", 5}, {"theta", {1.0, 2.0, 3.0}}}},
                     {"settings", {{"c_min", 0.0}, {"c_max", 6.0}, {"c_step", 0.01}}}}});
    list.push_back({"fig1", "calls to TV <= 0.1 on the single-mode toy target",
                    "toy1 p=100 (full scale 500), p1=10, theta=1,5,10, start at zeros, 20 replicates, budget 5e5 calls; "
                    "MH, IIT (sqrt), MH-IIT (rho=0.025), RN-IIT (m=p/5)",
                    tv_recipe("fig1", "toy1", 100, 10, figure_samplers(false))});
    list.push_back({"fig2", "calls to TV <= 0.2 on the two-branch toy target",
                    "toy2 p=100 (full scale 500), theta=1,5,10, start with the last 10 coordinates on, 20 replicates, "
                    "budget 5e5 calls; MH, IIT, MH-IIT-1 (min1), MH-IIT-2 (HC with c=2 theta), RN-IIT",
                    tv_recipe("fig2", "toy2", 100, 0, figure_samplers(true))});
    list.push_back({"fig3", "calls to TV <= 0.5 on the bimodal toy target",
                    "toy3 p=50 (full scale 200), p1=12, theta=1,5,10, start at zeros, 20 replicates, budget 5e5 calls; "
                    "MH, IIT, MH-IIT, RN-IIT (m=p/5)",
                    tv_recipe("fig3", "toy3", 50, 12, figure_samplers(false))});
    {
        Json samplers = Json::array();
        for (double a : {0.05, 0.2, 0.4, 0.6, 0.8, 1.0}) {
            std::ostringstream label;
            label << "CT-IIT-a" << a;
            samplers.push_back(sampler_json("ct-iit", {{"label", label.str()}, {"h", "sqrt"}, {"a", a}}));
        }
        list.push_back({"fig4", "iterations between the modes of the shifted bimodal target across temperatures",
                        "toy4 p=200, p1=10, theta=6, CT-IIT (sqrt) with a=0.05,0.2,0.4,0.6,0.8,1, 20 replicates, "
                        "truncated at 1e4 iterations",
                        {{"kind", "hitting-time"},
                         {"name", "fig4"},
                         {"seed", 2024},
                         {"replicates", 20},
                         {"target", {{"example", "toy4"}, {"p", 200}, {"p1", 10}, {"theta", {6.0}}}},
                         {"settings", {{"max_iterations", 10000}}},
                         {"samplers", samplers}}});
    }
    list.push_back({"estimate", "self-normalized estimates of pi(F=0) on a three-dimensional toy target",
                    "toy1 p=3, theta=1, 10 replicates, 1e5 calls each; IIT, MH-IIT (rho=0.025), RN-IIT (m=2)",
                    {{"kind", "estimate"},
                     {"name", "estimate"},
                     {"seed", 2024},
                     {"replicates", 10},
                     {"budget", 100000},
                     {"target", {{"example", "toy1"}, {"p", 3}, {"p1", 1}, {"theta", {1.0}}}},
                     {"settings", {{"key", 0}}},
                     {"samplers", Json::array({sampler_json("naive-iit", {{"label", "IIT"}}),
                                               sampler_json("mh-iit", {{"label", "MH-IIT"}, {"rho", 0.025}}),
                                               sampler_json("rn-iit", {{"label", "RN-IIT"}, {"m", 2}})})}}});
    list.push_back({"appendixA", "asymptotic variance of the mixed estimator: ordering, bounds and Monte Carlo check",
                    "toy1 p=4, p1=2, theta=1, h=min1, rho grid 0..1; 500 runs of 1e5 iterations at rho=0 and 0.5",
                    {{"kind", "appendixA-verify"},
                     {"name", "appendixA"},
                     {"seed", 2024},
                     {"replicates", 500},
                     {"target", {{"example", "toy1"}, {"p", 4}, {"p1", 2}, {"theta", 1.0}}},
                     {"settings", {{"h", "min1"}, {"mc_rho", {0.0, 0.5}}, {"mc_iterations", 100000}}}}});
    list.push_back({"six-mode", "mode discovery on the six-mode variable-selection posterior",
                    "n=100, p=200, data seed 1, g=p^2, nu=1, sigma2=2; 20 runs of 5e4 iterations; IIT (sqrt) vs "
                    "VT-IIT (J=4, Delta=2, M2)",
                    {{"kind", "six-mode"},
                     {"name", "six-mode"},
                     {"seed", 2024},
                     {"replicates", 20},
                     {"target", {{"n", 100}, {"p", 200}, {"data_seed", 1}, {"sigma2", 2.0}}},
                     {"settings", {{"iterations", 50000}}},
                     {"samplers",
                      Json::array({sampler_json("naive-iit", {{"label", "IIT"}, {"h", "sqrt"}}),
                                   sampler_json("vt-iit", {{"label", "VT-IIT"},
                                                           {"ladder", {{"J", 4}, {"delta", 2.0}, {"method", "M2"}}}})})}}});
    list.push_back({"abc", "posterior mean of the geometric ABC target",
                    "a=0.5, b=0.4, K=100, start at x=15, 50 replicates of 1e4 P-IIT iterations (sqrt), 50% burn-in; "
                    "P-MH at equal posterior calls",
                    {{"kind", "abc"},
                     {"name", "abc"},
                     {"seed", 2024},
                     {"replicates", 50},
                     {"target", {{"a", 0.5}, {"b", 0.4}, {"K", 100}}},
                     {"settings", {{"iterations", 10000}, {"burn_in", 0.5}, {"initial", 15}, {"equal_calls", true}}},
                     {"samplers", Json::array({sampler_json("p-iit", {{"label", "P-IIT"}, {"h", "sqrt"}}),
                                               sampler_json("p-mh", {{"label", "P-MH"}})})}}});
    list.push_back({"noisy-toy2", "calls to TV <= 0.2 on the two-branch target with a noisy likelihood",
                    "toy2 p=100, theta=8, sigma=0.5, start with the last 10 coordinates on, 20 replicates, budget 5e5 "
                    "calls; P-IIT (sqrt) vs P-MH",
                    {{"kind", "tv-threshold"},
                     {"name", "noisy-toy2"},
                     {"seed", 2024},
                     {"replicates", 20},
                     {"budget", 500000},
                     {"target", {{"example", "noisy-toy2"}, {"p", 100}, {"theta", {8.0}}, {"sigma", 0.5}}},
                     {"samplers", Json::array({sampler_json("p-iit", {{"label", "P-IIT"}, {"h", "sqrt"}}),
                                               sampler_json("p-mh", {{"label", "P-MH"}})})}}});
    list.push_back({"gaussian-mtit", "multiple-try IIT on a standard Gaussian",
                    "p=10 (full scale 50), m=50, sqrt, start at (10,...,10), 20 replicates, 5e5 calls, 50% burn-in",
                    {{"kind", "gaussian-mtit"},
                     {"name", "gaussian-mtit"},
                     {"seed", 2024},
                     {"replicates", 20},
                     {"budget", 500000},
                     {"target", {{"p", 10}}},
                     {"settings", {{"start", 10.0}, {"burn_in", 0.5}, {"radius_factor", 2.0}}},
                     {"samplers", Json::array({sampler_json("mt-it", {{"label", "MT-IT"}, {"h", "sqrt"}, {"m", 50}})})}}});
    return list;
}

}  // namespace

const std::vector<Recipe>& recipes() {
    static const std::vector<Recipe> list = build_recipes();
    return list;
}

const Recipe& find_recipe(const std::string& name) {
    for (const Recipe& r : recipes())
        if (r.name == name) return r;
    std::string names;
    for (const Recipe& r : recipes()) names += (names.empty() ? "" : ", ") + r.name;
    throw ConfigError("unknown recipe '" + name + "' (available: " + names + ")");
}

std::string list_recipes_text() {
    std::ostringstream out;
    for (const Recipe& r : recipes()) {
        out << r.name << "\n";
        out << "  reproduces: " << r.anchor << "\n";
        out << "  desk scale: " << r.description << "\n";
    }
    return out.str();
}

Json recipe_config(const Recipe& recipe, const RecipeOverrides& overrides) {
    Json config = recipe.config;
    if (overrides.p) {
        if (!config.contains("target") || !config["target"].contains("p"))
            throw ConfigError("recipe '" + recipe.name + "' has no dimension to override");
        const int old_p = config["target"]["p"].get<int>();
        config["target"]["p"] = *overrides.p;
        if (config["target"].contains("p1")) {
            const int p1 = config["target"]["p1"].get<int>();
            config["target"]["p1"] = std::max(1, static_cast<int>(std::lround(static_cast<double>(p1) * *overrides.p / old_p)));
        }
        if (config["target"].contains("g")) config["target"].erase("g");
    }
    if (overrides.theta) {
        if (!config.contains("target") || !config["target"].contains("theta"))
            throw ConfigError("recipe '" + recipe.name + "' has no theta to override");
        config["target"]["theta"] = *overrides.theta;
    }
    if (overrides.replicates) config["replicates"] = *overrides.replicates;
    if (overrides.seed) config["seed"] = *overrides.seed;
    if (overrides.budget) config["budget"] = *overrides.budget;
    if (overrides.workers) config["workers"] = *overrides.workers;
    if (overrides.output) config["output"] = *overrides.output;
    return config;
}

}  // namespace iit
