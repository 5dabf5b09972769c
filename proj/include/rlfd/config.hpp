#pragma once

// Experiment configuration: TOML or JSON text, optional named presets merged
// on top, then validated into a typed ExperimentConfig. Every schema error
// names the offending key and the line it came from.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "rlfd/environments.hpp"
#include "rlfd/io.hpp"
#include "rlfd/smd.hpp"

namespace rlfd {

class ConfigError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------- source tree

/// Parsed document plus the source line of every key path ("a.b[2].c").
struct ConfigSource {
    nlohmann::json doc;
    std::map<std::string, std::size_t> lines;
    std::string origin;

    std::string where(const std::string& path) const {
        auto it = lines.find(path);
        if (it == lines.end()) return origin;
        return origin + ":" + std::to_string(it->second);
    }
};

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

inline nlohmann::json toml_to_json(const toml::node& node, const std::string& path,
                                   std::map<std::string, std::size_t>& lines) {
    lines[path] = node.source().begin.line;
    if (const auto* t = node.as_table()) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [k, v] : *t) {
            const std::string child = join_path(path, std::string(k.str()));
            out[std::string(k.str())] = toml_to_json(v, child, lines);
        }
        return out;
    }
    if (const auto* a = node.as_array()) {
        nlohmann::json out = nlohmann::json::array();
        for (std::size_t i = 0; i < a->size(); ++i) {
            out.push_back(toml_to_json(*a->get(i), path + "[" + std::to_string(i) + "]", lines));
        }
        return out;
    }
    if (const auto* v = node.as_integer()) return v->get();
    if (const auto* v = node.as_floating_point()) return v->get();
    if (const auto* v = node.as_boolean()) return v->get();
    if (const auto* v = node.as_string()) return v->get();
    throw ConfigError("unsupported TOML value type at '" + path + "'");
}

/// Records the line on which every JSON value starts, keyed like toml_to_json.
class JsonLineScanner {
public:
    JsonLineScanner(const std::string& text, std::map<std::string, std::size_t>& lines) : s_(text), lines_(lines) {}

    void run() {
        skip_ws();
        value("");
    }

private:
    void skip_ws() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) {
            if (s_[i_] == '\n') ++line_;
            ++i_;
        }
    }
    std::string string_token() {
        std::string out;
        ++i_;  // opening quote
        while (i_ < s_.size() && s_[i_] != '"') {
            if (s_[i_] == '\\' && i_ + 1 < s_.size()) {
                out += s_[i_ + 1];
                i_ += 2;
                continue;
            }
            out += s_[i_++];
        }
        ++i_;
        return out;
    }
    void value(const std::string& path) {
        skip_ws();
        if (i_ >= s_.size()) return;
        lines_[path] = line_;
        const char ch = s_[i_];
        if (ch == '{') {
            ++i_;
            skip_ws();
            while (i_ < s_.size() && s_[i_] != '}') {
                const std::string key = string_token();
                skip_ws();
                ++i_;  // colon
                value(join_path(path, key));
                skip_ws();
                if (i_ < s_.size() && s_[i_] == ',') ++i_;
                skip_ws();
            }
            ++i_;
        } else if (ch == '[') {
            ++i_;
            skip_ws();
            std::size_t idx = 0;
            while (i_ < s_.size() && s_[i_] != ']') {
                value(path + "[" + std::to_string(idx++) + "]");
                skip_ws();
                if (i_ < s_.size() && s_[i_] == ',') ++i_;
                skip_ws();
            }
            ++i_;
        } else if (ch == '"') {
            string_token();
        } else {
            while (i_ < s_.size() && s_[i_] != ',' && s_[i_] != '}' && s_[i_] != ']' &&
                   !std::isspace(static_cast<unsigned char>(s_[i_]))) {
                ++i_;
            }
        }
    }

    const std::string& s_;
    std::map<std::string, std::size_t>& lines_;
    std::size_t i_ = 0;
    std::size_t line_ = 1;
};

inline void merge_into(nlohmann::json& target, const nlohmann::json& patch, const std::string& target_path,
                       const std::string& patch_path, ConfigSource& src) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const std::string tp = join_path(target_path, it.key());
        const std::string pp = join_path(patch_path, it.key());
        if (it->is_object() && target.contains(it.key()) && target[it.key()].is_object()) {
            merge_into(target[it.key()], *it, tp, pp, src);
        } else {
            target[it.key()] = *it;
            // Re-key every line below the patched value onto its new path.
            std::vector<std::pair<std::string, std::size_t>> moved;
            for (const auto& [k, line] : src.lines) {
                if (k == pp || k.rfind(pp + ".", 0) == 0 || k.rfind(pp + "[", 0) == 0) {
                    moved.emplace_back(tp + k.substr(pp.size()), line);
                }
            }
            for (auto& [k, line] : moved) src.lines[k] = line;
        }
    }
}

}  // namespace detail

inline ConfigSource parse_config_text(const std::string& text, const std::string& origin, bool is_json) {
    ConfigSource src;
    src.origin = origin;
    if (is_json) {
        try {
            src.doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(origin + ": JSON syntax error: " + e.what());
        }
        detail::JsonLineScanner(text, src.lines).run();
    } else {
        try {
            const toml::table table = toml::parse(text, origin);
            src.doc = detail::toml_to_json(table, "", src.lines);
        } catch (const toml::parse_error& e) {
            throw ConfigError(origin + ":" + std::to_string(e.source().begin.line) +
                              ": TOML syntax error: " + std::string(e.description()));
        }
    }
    if (!src.doc.is_object()) throw ConfigError(origin + ": top level must be a table");
    return src;
}

inline ConfigSource load_config_file(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return parse_config_text(text, path.string(), path.extension() == ".json");
}

/// Merges `presets.<name>` over the document and drops the `presets` table.
/// With no name, `default_preset` is used when present.
inline void apply_preset(ConfigSource& src, std::optional<std::string> name) {
    if (!name && src.doc.contains("default_preset")) {
        if (!src.doc["default_preset"].is_string()) {
            throw ConfigError(src.where("default_preset") + ": 'default_preset' must be a string");
        }
        name = src.doc["default_preset"].get<std::string>();
    }
    if (name) {
        const std::string path = "presets." + *name;
        if (!src.doc.contains("presets") || !src.doc["presets"].contains(*name)) {
            throw ConfigError(src.origin + ": preset '" + *name + "' is not defined");
        }
        const nlohmann::json patch = src.doc["presets"][*name];
        if (!patch.is_object()) throw ConfigError(src.where(path) + ": preset must be a table");
        detail::merge_into(src.doc, patch, "", path, src);
    }
    src.doc.erase("presets");
    src.doc.erase("default_preset");
}

// ---------------------------------------------------------------- typed config

enum class ExperimentKind {
    Single,
    PriorPerturbation,
    AlphaSweep,
    HullComparison,
    GridworldRegularization,
    ConvergenceTrace,
    GapTrace,
    GridGallery,
};

inline const std::map<std::string, ExperimentKind>& experiment_kinds() {
    static const std::map<std::string, ExperimentKind> kinds{
        {"single", ExperimentKind::Single},
        {"prior_perturbation", ExperimentKind::PriorPerturbation},
        {"alpha_sweep", ExperimentKind::AlphaSweep},
        {"hull_comparison", ExperimentKind::HullComparison},
        {"gridworld_regularization", ExperimentKind::GridworldRegularization},
        {"convergence_trace", ExperimentKind::ConvergenceTrace},
        {"gap_trace", ExperimentKind::GapTrace},
        {"grid_gallery", ExperimentKind::GridGallery},
    };
    return kinds;
}

struct EnvironmentSpec {
    enum class Type { Inventory, Gridworld } type = Type::Inventory;
    InventoryConfig inventory;
    GridworldConfig grid;
    std::size_t random_layouts = 0;  // grid_gallery: number of random layouts
    std::size_t layout_obstacles = 0;
    std::size_t layout_goals = 0;
};

struct ExpertSpec {
    enum class Type { Optimal, Misspecified, EarlyStop } type = Type::Optimal;
    InventoryParams params;
    std::size_t iters = 1;
};

struct PriorSpec {
    enum class Type { Exact, Zero, Params, Perturbed, Partial } type = Type::Exact;
    InventoryParams params;
    std::vector<double> zetas;
    std::size_t reps = 1;
    double fraction = 0.5;
};

struct AlgorithmSpec {
    std::size_t runs = 1;
    std::size_t iterations = 1000;
    bool theorem_steps = false;
    double epsilon = 0.1;
    double eta_cu = 1e-2;
    double eta_mu = 1e-2;
    EstimatorMode estimator = EstimatorMode::ExactCU;
    InitMode init = InitMode::Random;
    std::vector<double> alphas{0.0};
    std::optional<std::size_t> gap_every;
    std::optional<std::size_t> trace_every;
    bool hull = false;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Single;
    std::string kind_name = "single";
    std::string name;
    std::uint64_t seed = 0;
    std::string output_dir;  // empty: chosen by the caller
    EnvironmentSpec environment;
    ExpertSpec expert;
    PriorSpec prior;
    AlgorithmSpec algorithm;
    std::vector<std::size_t> capacities;  // hull_comparison
    nlohmann::json resolved;              // validated document, echoed into header.json
};

namespace detail {

inline bool is_count(const nlohmann::json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

/// Typed accessor over one table of the document that tracks which keys were consumed.
class TableReader {
public:
    TableReader(const ConfigSource& src, const nlohmann::json& table, std::string path)
        : src_(src), table_(table), path_(std::move(path)) {}

    bool has(const std::string& key) const { return table_.contains(key); }

    std::string key_path(const std::string& key) const { return join_path(path_, key); }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw ConfigError(src_.where(key.empty() ? path_ : key_path(key)) + ": '" +
                          (key.empty() ? path_ : key_path(key)) + "' " + msg);
    }

    const nlohmann::json& raw(const std::string& key) {
        used_.push_back(key);
        return table_.at(key);
    }

    std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        if (!has(key)) {
            if (fallback) return *fallback;
            fail(key, "is required");
        }
        const auto& v = raw(key);
        if (!v.is_string()) fail(key, "must be a string");
        return v.get<std::string>();
    }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        if (!has(key)) {
            if (fallback) return *fallback;
            fail(key, "is required");
        }
        const auto& v = raw(key);
        if (!v.is_number()) fail(key, "must be a number");
        return v.get<double>();
    }

    std::uint64_t integer(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt) {
        if (!has(key)) {
            if (fallback) return *fallback;
            fail(key, "is required");
        }
        const auto& v = raw(key);
        if (!is_count(v)) fail(key, "must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_boolean()) fail(key, "must be true or false");
        return v.get<bool>();
    }

    std::vector<double> numbers(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_array()) fail(key, "must be an array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) fail(key, "must be an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    template <class E>
    E choice(const std::string& key, const std::map<std::string, E>& options, std::optional<E> fallback = std::nullopt) {
        if (!has(key)) {
            if (fallback) return *fallback;
            fail(key, "is required");
        }
        const std::string s = string(key);
        auto it = options.find(s);
        if (it == options.end()) {
            std::string allowed;
            for (const auto& [k, _] : options) allowed += (allowed.empty() ? "" : ", ") + k;
            fail(key, "has unknown value '" + s + "' (allowed: " + allowed + ")");
        }
        return it->second;
    }

    TableReader sub(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_object()) fail(key, "must be a table");
        return TableReader(src_, v, key_path(key));
    }

    void finish() const {
        for (auto it = table_.begin(); it != table_.end(); ++it) {
            if (std::find(used_.begin(), used_.end(), it.key()) == used_.end()) fail(it.key(), "is not a recognized key");
        }
    }

private:
    const ConfigSource& src_;
    const nlohmann::json& table_;
    std::string path_;
    std::vector<std::string> used_;
};

inline InventoryParams read_params(TableReader& t, const std::string& key) {
    const auto v = t.numbers(key);
    if (v.size() != 3) t.fail(key, "must hold three numbers [c_o, c_h, c_s]");
    return {v[0], v[1], v[2]};
}

inline std::vector<double> read_grid(TableReader& t, const std::string& list_key, const std::string& range_key) {
    if (t.has(list_key) && t.has(range_key)) t.fail(range_key, "conflicts with '" + t.key_path(list_key) + "'");
    if (t.has(list_key)) {
        auto v = t.numbers(list_key);
        if (v.empty()) t.fail(list_key, "must not be empty");
        return v;
    }
    if (t.has(range_key)) {
        const auto v = t.numbers(range_key);
        if (v.size() != 3 || v[2] < 1 || v[2] != std::floor(v[2])) {
            t.fail(range_key, "must be [start, stop, points] with integer points >= 1");
        }
        const auto points = static_cast<std::size_t>(v[2]);
        std::vector<double> out(points);
        for (std::size_t i = 0; i < points; ++i) {
            out[i] = points == 1 ? v[0] : v[0] + (v[1] - v[0]) * static_cast<double>(i) / static_cast<double>(points - 1);
        }
        return out;
    }
    return {};
}

inline std::vector<Cell> read_cells(TableReader& t, const std::string& key) {
    const auto& v = t.raw(key);
    if (!v.is_array()) t.fail(key, "must be an array of [row, col] pairs");
    std::vector<Cell> out;
    for (const auto& c : v) {
        if (!c.is_array() || c.size() != 2 || !is_count(c[0]) || !is_count(c[1])) {
            t.fail(key, "must be an array of [row, col] pairs of non-negative integers");
        }
        out.push_back({c[0].get<std::size_t>(), c[1].get<std::size_t>()});
    }
    return out;
}

}  // namespace detail

/// Validates a preset-resolved document into an ExperimentConfig.
inline ExperimentConfig build_experiment_config(const ConfigSource& src) {
    using detail::TableReader;
    ExperimentConfig cfg;
    cfg.resolved = src.doc;
    TableReader top(src, src.doc, "");

    cfg.kind_name = top.string("kind");
    {
        const auto& kinds = experiment_kinds();
        auto it = kinds.find(cfg.kind_name);
        if (it == kinds.end()) top.fail("kind", "has unknown value '" + cfg.kind_name + "'");
        cfg.kind = it->second;
    }
    cfg.name = top.string("name", cfg.kind_name);
    cfg.seed = top.integer("seed", 0);
    cfg.output_dir = top.string("output_dir", std::string());

    // environment
    if (!top.has("environment")) top.fail("environment", "is required");
    {
        TableReader env = top.sub("environment");
        const std::map<std::string, EnvironmentSpec::Type> types{{"inventory", EnvironmentSpec::Type::Inventory},
                                                                 {"gridworld", EnvironmentSpec::Type::Gridworld}};
        cfg.environment.type = env.choice("type", types);
        if (cfg.environment.type == EnvironmentSpec::Type::Inventory) {
            InventoryConfig& inv = cfg.environment.inventory;
            inv.capacity = env.integer("capacity", 15);
            inv.demand_mean = env.number("demand_mean", 10.0);
            inv.demand = env.choice<DemandModel>(
                "demand_model", {{"truncated", DemandModel::TruncatedAtCapacity}, {"full", DemandModel::Full}},
                DemandModel::TruncatedAtCapacity);
            if (env.has("params")) inv.params = detail::read_params(env, "params");
            inv.gamma = env.number("gamma", 0.9);
            try {
                inv.validate();
            } catch (const InvalidArgument& e) {
                env.fail("", e.what());
            }
        } else {
            GridworldConfig& g = cfg.environment.grid;
            g.height = env.integer("height", 4);
            g.width = env.integer("width", 4);
            if (env.has("obstacles")) g.obstacles = detail::read_cells(env, "obstacles");
            if (env.has("goals")) g.goals = detail::read_cells(env, "goals");
            g.wind_prob = env.number("wind_prob", 0.2);
            g.gamma = env.number("gamma", 0.7);
            g.goal_absorbing = env.boolean("goal_absorbing", false);
            cfg.environment.random_layouts = env.integer("random_layouts", 0);
            cfg.environment.layout_obstacles = env.integer("layout_obstacles", 0);
            cfg.environment.layout_goals = env.integer("layout_goals", 0);
            try {
                g.validate();
            } catch (const InvalidArgument& e) {
                env.fail("", e.what());
            }
            if (cfg.environment.layout_obstacles + cfg.environment.layout_goals > g.height * g.width) {
                env.fail("layout_obstacles", "plus layout_goals exceeds the number of cells");
            }
        }
        env.finish();
    }
    const bool inventory = cfg.environment.type == EnvironmentSpec::Type::Inventory;

    // expert
    if (top.has("expert")) {
        TableReader ex = top.sub("expert");
        cfg.expert.type = ex.choice<ExpertSpec::Type>("type", {{"optimal", ExpertSpec::Type::Optimal},
                                                               {"misspecified", ExpertSpec::Type::Misspecified},
                                                               {"earlystop", ExpertSpec::Type::EarlyStop}});
        if (cfg.expert.type == ExpertSpec::Type::Misspecified) {
            if (!inventory) ex.fail("type", "'misspecified' requires the inventory environment");
            cfg.expert.params = detail::read_params(ex, "params");
        }
        if (cfg.expert.type == ExpertSpec::Type::EarlyStop) {
            cfg.expert.iters = ex.integer("iters");
            if (cfg.expert.iters < 1) ex.fail("iters", "must be >= 1");
        }
        ex.finish();
    }

    // prior
    if (top.has("prior")) {
        TableReader pr = top.sub("prior");
        cfg.prior.type = pr.choice<PriorSpec::Type>("type", {{"exact", PriorSpec::Type::Exact},
                                                             {"zero", PriorSpec::Type::Zero},
                                                             {"params", PriorSpec::Type::Params},
                                                             {"perturbed", PriorSpec::Type::Perturbed},
                                                             {"partial", PriorSpec::Type::Partial}});
        switch (cfg.prior.type) {
            case PriorSpec::Type::Params:
                if (!inventory) pr.fail("type", "'params' requires the inventory environment");
                cfg.prior.params = detail::read_params(pr, "params");
                break;
            case PriorSpec::Type::Perturbed:
                if (!inventory) pr.fail("type", "'perturbed' requires the inventory environment");
                cfg.prior.zetas = detail::read_grid(pr, "zetas", "zeta_range");
                if (cfg.prior.zetas.empty()) pr.fail("zetas", "or 'zeta_range' is required");
                for (double z : cfg.prior.zetas) {
                    if (!(z >= 0.0)) pr.fail("zetas", "must be non-negative");
                }
                cfg.prior.reps = pr.integer("reps", 5);
                if (cfg.prior.reps < 1) pr.fail("reps", "must be >= 1");
                break;
            case PriorSpec::Type::Partial:
                if (inventory) pr.fail("type", "'partial' requires the gridworld environment");
                cfg.prior.fraction = pr.number("fraction", 0.5);
                if (!(cfg.prior.fraction >= 0.0 && cfg.prior.fraction <= 1.0)) pr.fail("fraction", "must lie in [0, 1]");
                break;
            default:
                break;
        }
        pr.finish();
    }

    // algorithm
    if (!top.has("algorithm")) top.fail("algorithm", "is required");
    {
        TableReader al = top.sub("algorithm");
        AlgorithmSpec& a = cfg.algorithm;
        a.runs = al.integer("runs", 1);
        if (a.runs < 1) al.fail("runs", "must be >= 1");
        const std::string steps = al.string("step_sizes", std::string("fixed"));
        if (steps != "fixed" && steps != "theorem") al.fail("step_sizes", "must be 'fixed' or 'theorem'");
        a.theorem_steps = steps == "theorem";
        a.epsilon = al.number("epsilon", 0.1);
        if (!(a.epsilon > 0.0 && a.epsilon < 1.0)) al.fail("epsilon", "must lie in (0, 1)");
        if (a.theorem_steps) {
            if (al.has("eta_cu")) al.fail("eta_cu", "conflicts with step_sizes = \"theorem\"");
            if (al.has("eta_mu")) al.fail("eta_mu", "conflicts with step_sizes = \"theorem\"");
            // iterations defaults to T_min; an explicit value overrides it.
            a.iterations = al.integer("iterations", 0);
        } else {
            a.iterations = al.integer("iterations");
            if (a.iterations < 1) al.fail("iterations", "must be >= 1");
            a.eta_cu = al.number("eta_cu");
            a.eta_mu = al.number("eta_mu");
            if (!(a.eta_cu > 0.0)) al.fail("eta_cu", "must be positive");
            if (!(a.eta_mu > 0.0)) al.fail("eta_mu", "must be positive");
        }
        a.estimator = al.choice<EstimatorMode>(
            "estimator", {{"exact_cu", EstimatorMode::ExactCU}, {"sampled_cu", EstimatorMode::SampledCU}},
            EstimatorMode::ExactCU);
        a.init = al.choice<InitMode>("init", {{"random", InitMode::Random}, {"default", InitMode::Default}},
                                     InitMode::Random);
        if (al.has("alpha") && (al.has("alphas") || al.has("alpha_range"))) {
            al.fail("alpha", "conflicts with 'alphas'/'alpha_range'");
        }
        if (al.has("alpha")) {
            a.alphas = {al.number("alpha")};
        } else {
            auto grid = detail::read_grid(al, "alphas", "alpha_range");
            a.alphas = grid.empty() ? std::vector<double>{0.0} : grid;
        }
        for (double x : a.alphas) {
            if (!(x >= 0.0)) al.fail(al.has("alpha") ? "alpha" : "alphas", "must be non-negative");
        }
        if (al.has("gap_every")) {
            a.gap_every = al.integer("gap_every");
            if (*a.gap_every < 1) al.fail("gap_every", "must be >= 1");
        }
        if (al.has("trace_every")) {
            a.trace_every = al.integer("trace_every");
            if (*a.trace_every < 1) al.fail("trace_every", "must be >= 1");
        }
        const std::string cc = al.string("cost_class", std::string("box"));
        if (cc != "box" && cc != "hull") al.fail("cost_class", "must be 'box' or 'hull'");
        a.hull = cc == "hull";
        if (a.hull && !inventory) al.fail("cost_class", "'hull' requires the inventory environment");
        if (a.hull && cfg.kind != ExperimentKind::Single) al.fail("cost_class", "'hull' is only valid for kind 'single'");
        if (a.hull) {
            for (double x : a.alphas) {
                if (x != 0.0) al.fail("cost_class", "'hull' requires alpha = 0");
            }
        }
        al.finish();
    }

    if (top.has("capacities")) {
        const auto& v = top.raw("capacities");
        if (!v.is_array() || v.empty()) top.fail("capacities", "must be a non-empty array of integers");
        for (const auto& x : v) {
            if (!detail::is_count(x) || x.get<std::size_t>() < 1) top.fail("capacities", "entries must be integers >= 1");
            cfg.capacities.push_back(x.get<std::size_t>());
        }
    }

    // per-kind requirements
    const AlgorithmSpec& a = cfg.algorithm;
    switch (cfg.kind) {
        case ExperimentKind::Single:
            if (a.alphas.size() != 1) top.fail("algorithm", "kind 'single' takes exactly one alpha");
            break;
        case ExperimentKind::PriorPerturbation:
            if (!inventory) top.fail("environment", "kind 'prior_perturbation' requires the inventory environment");
            if (cfg.prior.type != PriorSpec::Type::Perturbed) top.fail("prior", "kind 'prior_perturbation' requires type = \"perturbed\"");
            if (a.alphas.size() != 1) top.fail("algorithm", "kind 'prior_perturbation' takes exactly one alpha");
            break;
        case ExperimentKind::AlphaSweep:
            break;
        case ExperimentKind::HullComparison:
            if (!inventory) top.fail("environment", "kind 'hull_comparison' requires the inventory environment");
            if (a.alphas.size() != 1 || a.alphas[0] != 0.0) top.fail("algorithm", "kind 'hull_comparison' requires alpha = 0");
            if (cfg.capacities.empty()) cfg.capacities = {cfg.environment.inventory.capacity};
            break;
        case ExperimentKind::GridworldRegularization:
            if (inventory) top.fail("environment", "kind 'gridworld_regularization' requires the gridworld environment");
            break;
        case ExperimentKind::ConvergenceTrace:
            if (!a.trace_every) top.fail("algorithm", "kind 'convergence_trace' requires trace_every");
            break;
        case ExperimentKind::GapTrace:
            if (!a.gap_every) top.fail("algorithm", "kind 'gap_trace' requires gap_every");
            if (a.hull) top.fail("algorithm", "kind 'gap_trace' does not support the hull cost class");
            break;
        case ExperimentKind::GridGallery:
            if (inventory) top.fail("environment", "kind 'grid_gallery' requires the gridworld environment");
            if (cfg.environment.random_layouts < 1) top.fail("environment", "kind 'grid_gallery' requires random_layouts >= 1");
            if (a.alphas.size() != 1) top.fail("algorithm", "kind 'grid_gallery' takes exactly one alpha");
            break;
    }
    if (cfg.kind != ExperimentKind::HullComparison && top.has("capacities")) {
        top.fail("capacities", "is only valid for kind 'hull_comparison'");
    }
    top.finish();
    return cfg;
}

/// Load, apply the preset, validate.
inline ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                               const std::optional<std::string>& preset = std::nullopt) {
    ConfigSource src = load_config_file(path);
    apply_preset(src, preset);
    return build_experiment_config(src);
}

inline ExperimentConfig parse_experiment_config(const std::string& text, bool is_json,
                                                const std::optional<std::string>& preset = std::nullopt,
                                                const std::string& origin = "<config>") {
    ConfigSource src = parse_config_text(text, origin, is_json);
    apply_preset(src, preset);
    return build_experiment_config(src);
}

}  // namespace rlfd
