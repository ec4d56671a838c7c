#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "belllab/errors.hpp"
#include "belllab/interpretation.hpp"
#include "belllab/models.hpp"

namespace belllab {

/// Minimal flat-table TOML subset: [section] headers, key = value lines,
/// # comments. Values: "strings", booleans, numbers, and one-line arrays of
/// numbers. Nested tables, dates, and multi-line values are out of scope.
namespace toml {

struct Value {
    enum class Kind { Boolean, Number, String, Array } kind = Kind::Number;
    bool boolean = false;
    double number = 0.0;
    std::string string;
    std::vector<double> array;
    std::string raw;  // original token, for integer re-parsing
    int line = 0;
};

class Document {
  public:
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    const Value& at(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("config: missing key '" + key + "'");
        return it->second;
    }

    bool get_bool(const std::string& key) const {
        const Value& v = at(key);
        if (v.kind != Value::Kind::Boolean) throw type_error(key, v, "boolean");
        return v.boolean;
    }

    double get_number(const std::string& key) const {
        const Value& v = at(key);
        if (v.kind != Value::Kind::Number) throw type_error(key, v, "number");
        return v.number;
    }

    std::uint64_t get_u64(const std::string& key) const {
        const Value& v = at(key);
        if (v.kind != Value::Kind::Number) throw type_error(key, v, "integer");
        std::uint64_t out = 0;
        const char* first = v.raw.data();
        const char* last = first + v.raw.size();
        auto [ptr, ec] = std::from_chars(first, last, out);
        if (ec != std::errc{} || ptr != last)
            throw ConfigError("config: key '" + key + "' (line " + std::to_string(v.line) +
                              ") is not a non-negative integer: '" + v.raw + "'");
        return out;
    }

    std::string get_string(const std::string& key) const {
        const Value& v = at(key);
        if (v.kind != Value::Kind::String) throw type_error(key, v, "string");
        return v.string;
    }

    std::vector<double> get_array(const std::string& key) const {
        const Value& v = at(key);
        if (v.kind != Value::Kind::Array) throw type_error(key, v, "array");
        return v.array;
    }

    // typed lookups with defaults
    bool get_bool(const std::string& key, bool fallback) const {
        return has(key) ? get_bool(key) : fallback;
    }
    double get_number(const std::string& key, double fallback) const {
        return has(key) ? get_number(key) : fallback;
    }
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        return has(key) ? get_u64(key) : fallback;
    }
    std::string get_string(const std::string& key, const std::string& fallback) const {
        return has(key) ? get_string(key) : fallback;
    }

    const std::map<std::string, Value>& values() const { return values_; }

    void insert(const std::string& key, Value v) {
        if (values_.count(key))
            throw ConfigError("config: duplicate key '" + key + "' (line " +
                              std::to_string(v.line) + ")");
        values_.emplace(key, std::move(v));
    }

  private:
    static ConfigError type_error(const std::string& key, const Value& v, const char* want) {
        return ConfigError("config: key '" + key + "' (line " + std::to_string(v.line) +
                           ") must be a " + want);
    }

    std::map<std::string, Value> values_;
};

namespace detail {

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

/// Cut a trailing comment, respecting double quotes.
inline std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (c == '"') in_string = !in_string;
        if (c == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

inline double parse_number(const std::string& token, int line) {
    try {
        size_t pos = 0;
        double d = std::stod(token, &pos);
        if (pos != token.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(line) + ": bad number '" + token + "'");
    }
}

inline Value parse_value(const std::string& token, int line) {
    Value v;
    v.line = line;
    v.raw = token;
    if (token.empty()) throw ConfigError("config line " + std::to_string(line) + ": empty value");
    if (token == "true" || token == "false") {
        v.kind = Value::Kind::Boolean;
        v.boolean = (token == "true");
        return v;
    }
    if (token.front() == '"') {
        if (token.size() < 2 || token.back() != '"')
            throw ConfigError("config line " + std::to_string(line) + ": unterminated string");
        v.kind = Value::Kind::String;
        v.string = token.substr(1, token.size() - 2);
        return v;
    }
    if (token.front() == '[') {
        if (token.back() != ']')
            throw ConfigError("config line " + std::to_string(line) + ": unterminated array");
        v.kind = Value::Kind::Array;
        std::string body = token.substr(1, token.size() - 2);
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty())
                throw ConfigError("config line " + std::to_string(line) + ": empty array element");
            v.array.push_back(parse_number(item, line));
        }
        return v;
    }
    v.kind = Value::Kind::Number;
    v.number = parse_number(token, line);
    return v;
}

} // namespace detail

inline Document parse(const std::string& text) {
    Document doc;
    std::string section;
    std::stringstream stream(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(stream, raw)) {
        ++line_no;
        std::string line = detail::trim(detail::strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unterminated section header");
            section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = detail::trim(std::string_view(line).substr(0, eq));
        std::string token = detail::trim(std::string_view(line).substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        std::string full = section.empty() ? key : section + "." + key;
        doc.insert(full, detail::parse_value(token, line_no));
    }
    return doc;
}

} // namespace toml

/// Which analyses a run asks for.
struct AnalysisRequest {
    bool space1 = true;
    bool space2 = false;
    bool frequentism = false;
    bool feasibility = false;
    double sigma_level = 3.0;         // violation threshold, in standard errors
    bool relaxed_feasibility = false; // additionally solve the sigma-inflated relaxation
    double convergence_eps = 0.01;
    double tail_fraction = 0.2;
    double randomness_eps = 0.02;
};

struct OutputPaths {
    std::string trial_log;  // CSV; empty = don't write
    std::string report;     // JSON; empty = stdout only
};

struct RunConfig {
    ModelSpec model;
    std::uint64_t n_trials = 0;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    InterpretationMode interpretation = InterpretationMode::KolmogorovAxiomatic;
    ExperimentFlags flags;
    AnalysisRequest analyses;
    OutputPaths outputs;

    // Set when the trials come from an existing log instead of a model run;
    // the model block is then a placeholder and must not be validated or
    // echoed as a generator.
    bool from_log = false;
    std::string log_path;

    /// True when the run needs a space-2 number but the model cannot produce
    /// counterfactual quadruples, and feasibility stands in for it.
    bool space2_via_feasibility() const {
        return analyses.space2 && !supports_counterfactuals(model.kind) && analyses.feasibility;
    }

    void validate() const {
        if (from_log) {
            validate_analyses();
            return;
        }
        if (n_trials == 0) throw ConfigError("config: run.trials must be >= 1");
        if (threads == 0) throw ConfigError("config: run.threads must be >= 1");
        validate_analyses();
        try {
            model.validate();
        } catch (const DomainError& e) {
            throw ConfigError(std::string("config: model: ") + e.what());
        }
        if (analyses.space2 && !supports_counterfactuals(model.kind) && !analyses.feasibility)
            throw ConfigError(
                "config: space2 analysis needs counterfactual outcomes, which a '" +
                std::string(to_string(model.kind)) +
                "' model does not produce; request feasibility as the space-2 surrogate or drop "
                "space2");
    }

    void validate_analyses() const {
        if (!(analyses.sigma_level >= 0.0))
            throw ConfigError("config: analysis.sigma_level must be >= 0");
        if (!(analyses.convergence_eps > 0.0))
            throw ConfigError("config: analysis.convergence_eps must be > 0");
        if (!(analyses.tail_fraction > 0.0 && analyses.tail_fraction < 1.0))
            throw ConfigError("config: analysis.tail_fraction must be in (0, 1)");
        if (!(analyses.randomness_eps > 0.0))
            throw ConfigError("config: analysis.randomness_eps must be > 0");
    }
};

inline InterpretationMode parse_interpretation_mode(const std::string& name) {
    for (auto m : kAllModes)
        if (name == to_string(m)) return m;
    throw ConfigError("config: unknown interpretation mode '" + name +
                      "' (expected one of: kolmogorov_axiomatic, frequentist_von_mises, "
                      "single_case_propensity, long_run_propensity)");
}

inline ModelKind parse_model_kind(const std::string& name) {
    for (ModelKind k : {ModelKind::Quantum, ModelKind::LhvDeterministic, ModelKind::LhvStochastic,
                        ModelKind::Conspiracy, ModelKind::Signaling})
        if (name == to_string(k)) return k;
    throw ConfigError("config: unknown model kind '" + name +
                      "' (expected one of: quantum, lhv_deterministic, lhv_stochastic, "
                      "conspiracy, signaling)");
}

namespace detail {

inline SettingSet settings_from(const toml::Document& doc) {
    SettingSet s = canonical_settings();
    auto angle = [&](const char* key, Angle fallback) {
        return doc.has(key) ? Angle(doc.get_number(key)) : fallback;
    };
    try {
        s.left_unprimed = angle("model.alpha_unprimed_deg", s.left_unprimed);
        s.left_primed = angle("model.alpha_primed_deg", s.left_primed);
        s.right_unprimed = angle("model.beta_unprimed_deg", s.right_unprimed);
        s.right_primed = angle("model.beta_primed_deg", s.right_primed);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("config: model angles: ") + e.what());
    }
    return s;
}

inline std::vector<double> weights_from(const toml::Document& doc, size_t k) {
    if (!doc.has("model.lambda_weights")) return uniform_weights(k);
    return doc.get_array("model.lambda_weights");
}

inline ResponseTable response_from(const toml::Document& doc) {
    static const char* keys[2][2] = {{"model.left_unprimed", "model.left_primed"},
                                     {"model.right_unprimed", "model.right_primed"}};
    ResponseTable t;
    size_t k = 0;
    for (int side = 0; side < 2; ++side)
        for (int slot = 0; slot < 2; ++slot) {
            if (!doc.has(keys[side][slot]))
                throw ConfigError(std::string("config: missing response row '") +
                                  keys[side][slot] + "'");
            auto row = doc.get_array(keys[side][slot]);
            if (row.empty())
                throw ConfigError(std::string("config: empty response row '") + keys[side][slot] +
                                  "'");
            if (k == 0) k = row.size();
            if (row.size() != k)
                throw ConfigError("config: response rows must share one lambda cardinality");
            if (side == 0)
                t.left[slot] = row;
            else
                t.right[slot] = row;
        }
    return t;
}

} // namespace detail

/// Build a RunConfig from config text. Throws ConfigError on any problem.
inline RunConfig parse_run_config(const std::string& text) {
    toml::Document doc = toml::parse(text);
    RunConfig cfg;

    const std::string kind_name = doc.get_string("model.kind", "quantum");
    const ModelKind kind = parse_model_kind(kind_name);
    const SettingSet settings = detail::settings_from(doc);

    switch (kind) {
        case ModelKind::Quantum:
            cfg.model = ModelSpec::quantum(settings, doc.get_number("model.visibility", 1.0));
            break;
        case ModelKind::LhvDeterministic:
        case ModelKind::LhvStochastic:
        case ModelKind::Conspiracy: {
            ResponseTable table = detail::response_from(doc);
            auto weights = detail::weights_from(doc, table.lambda_cardinality());
            cfg.model = ModelSpec::lhv(kind, std::move(table), std::move(weights), settings);
            if (kind == ModelKind::Conspiracy)
                cfg.model.conspiracy_bias = doc.get_number("model.conspiracy_bias", 1.0);
            break;
        }
        case ModelKind::Signaling:
            cfg.model = ModelSpec::signaling(doc.get_number("model.signaling_strength", 1.0),
                                             settings);
            break;
    }

    cfg.n_trials = doc.get_u64("run.trials", 1000);
    cfg.seed = doc.get_u64("run.seed", 0);
    cfg.threads = static_cast<unsigned>(doc.get_u64("run.threads", 1));

    cfg.analyses.space1 = doc.get_bool("analysis.space1", true);
    cfg.analyses.space2 = doc.get_bool("analysis.space2", false);
    cfg.analyses.frequentism = doc.get_bool("analysis.frequentism", false);
    cfg.analyses.feasibility = doc.get_bool("analysis.feasibility", false);
    cfg.analyses.sigma_level = doc.get_number("analysis.sigma_level", 3.0);
    cfg.analyses.relaxed_feasibility = doc.get_bool("analysis.relaxed_feasibility", false);
    cfg.analyses.convergence_eps = doc.get_number("analysis.convergence_eps", 0.01);
    cfg.analyses.tail_fraction = doc.get_number("analysis.tail_fraction", 0.2);
    cfg.analyses.randomness_eps = doc.get_number("analysis.randomness_eps", 0.02);

    cfg.interpretation = parse_interpretation_mode(
        doc.get_string("interpretation.mode", "kolmogorov_axiomatic"));
    cfg.flags.spacelike_separated = doc.get_bool("interpretation.spacelike_separated", false);
    cfg.flags.conditions_exhaustive = doc.get_bool("interpretation.conditions_exhaustive", false);

    cfg.outputs.trial_log = doc.get_string("output.trial_log", "");
    cfg.outputs.report = doc.get_string("output.report", "");

    cfg.validate();
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("failed reading config file: " + path.string());
    return parse_run_config(buffer.str());
}

/// Worker count actually used: the configured count, capped by the
/// BELLLAB_THREADS environment variable when that is set.
inline unsigned resolve_threads(unsigned configured) {
    unsigned n = configured == 0 ? 1u : configured;
    if (const char* env = std::getenv("BELLLAB_THREADS")) {
        char* end = nullptr;
        unsigned long cap = std::strtoul(env, &end, 10);
        if (end && *end == '\0' && cap >= 1) n = std::min<unsigned long>(n, cap);
    }
    return n;
}

} // namespace belllab
