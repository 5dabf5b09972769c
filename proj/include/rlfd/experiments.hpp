#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "rlfd/config.hpp"
#include "rlfd/environments.hpp"
#include "rlfd/gap.hpp"
#include "rlfd/io.hpp"
#include "rlfd/smd.hpp"

namespace rlfd {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct ExperimentOptions {
    std::filesystem::path out_dir;
    std::size_t workers = 1;
};

// ---------------------------------------------------------------- worker pool

/// Runs fn(0..n-1) on up to `workers` threads. The first failing index's exception is rethrown.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& fn) {
    if (n == 0) return;
    workers = std::clamp<std::size_t>(workers, 1, n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        body();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(body);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

// ---------------------------------------------------------------- environments

struct BuiltEnvironment {
    std::shared_ptr<const Mdp> mdp;
    Vector true_cost;
    ForwardSolution optimal;
    std::optional<InventoryConfig> inventory_config;
    std::optional<InventoryModel> inventory;
    std::optional<GridworldConfig> grid;

    bool is_inventory() const { return inventory.has_value(); }
};

inline BuiltEnvironment build_environment(const InventoryConfig& cfg) {
    BuiltEnvironment env;
    env.inventory_config = cfg;
    env.inventory = build_inventory_mdp(cfg);
    env.mdp = std::make_shared<const Mdp>(env.inventory->mdp);
    env.true_cost = env.mdp->cost();
    env.optimal = solve_forward_optimal(*env.mdp, 1e-10);
    return env;
}

inline BuiltEnvironment build_environment(const GridworldConfig& cfg) {
    BuiltEnvironment env;
    env.grid = cfg;
    env.mdp = std::make_shared<const Mdp>(build_gridworld_mdp(cfg));
    env.true_cost = env.mdp->cost();
    env.optimal = solve_forward_optimal(*env.mdp, 1e-10);
    return env;
}

inline BuiltEnvironment build_environment(const EnvironmentSpec& spec) {
    return spec.type == EnvironmentSpec::Type::Inventory ? build_environment(spec.inventory) : build_environment(spec.grid);
}

inline Vector build_expert(const BuiltEnvironment& env, const ExpertSpec& spec) {
    switch (spec.type) {
        case ExpertSpec::Type::Optimal:
            return env.optimal.occupancy.mu;
        case ExpertSpec::Type::Misspecified:
            if (!env.is_inventory()) throw InvalidArgument("misspecified expert requires the inventory environment");
            return make_misspecified_expert(*env.inventory_config, spec.params).mu;
        case ExpertSpec::Type::EarlyStop:
            return make_earlystop_expert(*env.mdp, spec.iters).mu;
    }
    throw InvalidArgument("unknown expert type");
}

/// Proxy cost for every prior type except `perturbed`, which is drawn per noise realization.
inline Vector build_prior(const BuiltEnvironment& env, const PriorSpec& spec, Rng& rng) {
    switch (spec.type) {
        case PriorSpec::Type::Exact:
            return env.true_cost;
        case PriorSpec::Type::Zero:
            return Vector::Zero(env.true_cost.size());
        case PriorSpec::Type::Params:
            return inventory_cost_in_scale(*env.inventory, spec.params);
        case PriorSpec::Type::Partial:
            return make_partial_prior(*env.grid, spec.fraction, rng);
        case PriorSpec::Type::Perturbed:
            break;
    }
    throw InvalidArgument("build_prior: perturbed priors are drawn per realization");
}

// ---------------------------------------------------------------- cells

/// One batch of N seeded runs on a fixed problem.
struct CellSpec {
    std::string id;
    std::string dir;  // relative to the output root; empty means the root
    std::shared_ptr<const RlfdProblem> problem;
    const BuiltEnvironment* env = nullptr;
    SmdConfig smd;
    std::size_t runs = 1;
    std::uint64_t base_seed = 0;
    std::optional<std::size_t> theorem_t_min;
};

struct CellEvaluation {
    std::vector<std::size_t> apprentice_actions;
    std::vector<std::size_t> expert_actions;
    std::vector<std::size_t> optimal_actions;
    double agreement_optimal = 0.0;  // fraction of states with apprentice argmax == optimal action
    double agreement_expert = 0.0;
    double rho_true_apprentice = 0.0;
    double rho_true_expert = 0.0;
    double rho_true_optimal = 0.0;
    double rho_learned_expert = 0.0;
    double rho_learned_apprentice = 0.0;
    double rho_learned_optimal = 0.0;
    double distance_prior = 0.0;  // ||c_eps - c_hat||_2
    double l1_true = 0.0;         // ||c_eps - c_true||_1
    double tradeoff_lhs = 0.0;    // alpha ||c_eps - c_hat||^2 + rho_{c_eps}(pi_E) - rho_{c_eps}(pi_A)
    double gap = 0.0;
    std::optional<InventoryParams> recovered;
};

struct CellResult {
    CellSpec spec;
    std::vector<RunResult> runs;
    SaddleIterate mean;
    std::vector<TraceRow> trace;
    std::vector<GapRow> gaps;
    CellEvaluation eval;
};

inline SmdConfig make_smd_config(const AlgorithmSpec& a, const RlfdProblem& problem,
                                 std::optional<std::size_t>* t_min = nullptr) {
    SmdConfig cfg;
    cfg.epsilon = a.epsilon;
    if (a.theorem_steps) {
        const TheoremSchedule s = step_sizes_from_theorem(problem, a.epsilon);
        cfg.eta_cu = s.eta_cu;
        cfg.eta_mu = s.eta_mu;
        cfg.iterations = a.iterations > 0 ? a.iterations : s.t_min;
        if (t_min) *t_min = s.t_min;
    } else {
        cfg.eta_cu = a.eta_cu;
        cfg.eta_mu = a.eta_mu;
        cfg.iterations = a.iterations;
    }
    cfg.estimator_mode = a.estimator;
    cfg.init = a.init;
    cfg.gap_every = a.gap_every;
    cfg.trace_every = a.trace_every;
    return cfg;
}

/// Coordinatewise mean of the averaged iterates, accumulated in run order.
inline SaddleIterate mean_iterate(const std::vector<RunResult>& runs) {
    if (runs.empty()) throw InvalidArgument("mean_iterate: no runs");
    const SaddleIterate& first = runs.front().averaged;
    KahanVector c(first.c.size()), u(first.u.size()), mu(first.mu.size());
    std::optional<KahanVector> w;
    if (first.w) w.emplace(first.w->size());
    for (const RunResult& r : runs) {
        c.add(r.averaged.c);
        u.add(r.averaged.u);
        mu.add(r.averaged.mu);
        if (w) w->add(*r.averaged.w);
    }
    SaddleIterate out{c.mean(runs.size()), u.mean(runs.size()), mu.mean(runs.size()), std::nullopt};
    if (w) out.w = w->mean(runs.size());
    return out;
}

inline std::vector<TraceRow> mean_trace(const std::vector<RunResult>& runs) {
    std::vector<TraceRow> out;
    if (runs.empty() || runs.front().trace.empty()) return out;
    const std::size_t rows = runs.front().trace.size();
    for (std::size_t k = 0; k < rows; ++k) {
        KahanSum c, u, mu, w;
        for (const RunResult& r : runs) {
            c.add(r.trace[k].l1_c);
            u.add(r.trace[k].l1_u);
            mu.add(r.trace[k].l1_mu);
            w.add(r.trace[k].l1_w);
        }
        const double m = static_cast<double>(runs.size());
        out.push_back({runs.front().trace[k].t, c.value() / m, u.value() / m, mu.value() / m, w.value() / m});
    }
    return out;
}

inline std::vector<GapRow> mean_gaps(const std::vector<RunResult>& runs) {
    std::vector<GapRow> out;
    if (runs.empty() || runs.front().gaps.empty()) return out;
    for (std::size_t k = 0; k < runs.front().gaps.size(); ++k) {
        KahanSum g;
        for (const RunResult& r : runs) g.add(r.gaps[k].gap);
        out.push_back({runs.front().gaps[k].t, g.value() / static_cast<double>(runs.size())});
    }
    return out;
}

inline CellEvaluation evaluate_cell(const BuiltEnvironment& env, const RlfdProblem& problem, const SaddleIterate& mean) {
    const Mdp& mdp = *env.mdp;
    const std::size_t n_s = mdp.n_states(), n_a = mdp.n_actions();
    const Policy pi_a = policy_from_occupancy(mean.mu, n_s, n_a);
    const Policy pi_e = policy_from_occupancy(problem.expert_mu(), n_s, n_a);

    CellEvaluation ev;
    ev.apprentice_actions = pi_a.argmax();
    ev.expert_actions = pi_e.argmax();
    ev.optimal_actions = env.optimal.policy.argmax();
    std::size_t same_opt = 0, same_exp = 0;
    for (std::size_t s = 0; s < n_s; ++s) {
        same_opt += ev.apprentice_actions[s] == ev.optimal_actions[s];
        same_exp += ev.apprentice_actions[s] == ev.expert_actions[s];
    }
    ev.agreement_optimal = static_cast<double>(same_opt) / static_cast<double>(n_s);
    ev.agreement_expert = static_cast<double>(same_exp) / static_cast<double>(n_s);

    ev.rho_true_apprentice = policy_evaluation(mdp, pi_a, env.true_cost).rho;
    ev.rho_true_expert = policy_evaluation(mdp, pi_e, env.true_cost).rho;
    ev.rho_true_optimal = env.optimal.rho;
    ev.rho_learned_expert = policy_evaluation(mdp, pi_e, mean.c).rho;
    ev.rho_learned_apprentice = policy_evaluation(mdp, pi_a, mean.c).rho;
    ev.rho_learned_optimal = solve_forward_optimal(mdp, mean.c, 1e-10).rho;
    const Vector diff = mean.c - problem.c_hat();
    ev.distance_prior = diff.norm();
    ev.l1_true = (mean.c - env.true_cost).lpNorm<1>();
    ev.tradeoff_lhs = problem.alpha() * diff.squaredNorm() + ev.rho_learned_expert - ev.rho_learned_apprentice;
    ev.gap = duality_gap_exact(problem, mean);
    if (env.is_inventory()) ev.recovered = recover_inventory_params(mean.c, env.inventory->features, env.inventory->scale);
    return ev;
}

inline CellResult run_cell(const CellSpec& spec, std::size_t workers) {
    CellResult out;
    out.spec = spec;
    out.runs.resize(spec.runs);
    parallel_for(spec.runs, workers, [&](std::size_t i) {
        SmdConfig cfg = spec.smd;
        cfg.seed = spec.base_seed + i;
        out.runs[i] = run_smd(*spec.problem, cfg);
    });
    out.mean = mean_iterate(out.runs);
    out.trace = mean_trace(out.runs);
    out.gaps = mean_gaps(out.runs);
    out.eval = evaluate_cell(*spec.env, *spec.problem, out.mean);
    return out;
}

// ---------------------------------------------------------------- artifacts

/// Writes files under one root and records each in the manifest.
class ArtifactSink {
public:
    explicit ArtifactSink(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }

    void csv(const std::string& rel, const std::string& role, const std::string& cell, const CsvTable& table) {
        write_text_file(root_ / rel, table.str());
        nlohmann::json cols = nlohmann::json::array();
        for (std::size_t j = 0; j < table.columns().size(); ++j) {
            bool numeric = true;
            for (const auto& r : table.rows()) {
                char* end = nullptr;
                const std::string& cellv = r[j];
                std::strtod(cellv.c_str(), &end);
                if (cellv.empty() || end != cellv.c_str() + cellv.size()) {
                    numeric = false;
                    break;
                }
            }
            cols.push_back({{"name", table.columns()[j]}, {"type", numeric ? "number" : "string"}});
        }
        files_.push_back({{"path", rel}, {"format", "csv"}, {"role", role}, {"cell", cell},
                          {"rows", table.n_rows()}, {"columns", cols}});
    }

    void json(const std::string& rel, const std::string& role, const std::string& cell, const nlohmann::json& doc) {
        write_text_file(root_ / rel, doc.dump(2) + "\n");
        files_.push_back({{"path", rel}, {"format", "json"}, {"role", role}, {"cell", cell}});
    }

    nlohmann::json files() const { return files_; }

private:
    std::filesystem::path root_;
    nlohmann::json files_ = nlohmann::json::array();
};

namespace detail {

inline std::string join_rel(const std::string& dir, const std::string& file) {
    return dir.empty() ? file : dir + "/" + file;
}

inline std::string indexed(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%02zu", prefix, i);
    return buf;
}

inline void add_blocks(CsvTable& t, const SaddleIterate& it, const std::optional<std::size_t>& run) {
    auto block = [&](const char* name, const Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            t.row();
            if (run) t.add(*run);
            t.add(name).add(static_cast<std::size_t>(i)).add(v(i));
        }
    };
    block("c", it.c);
    block("u", it.u);
    block("mu", it.mu);
    if (it.w) block("w", *it.w);
}

inline nlohmann::json params_json(const InventoryParams& p) {
    return {{"order_cost", p.order_cost}, {"holding_cost", p.holding_cost}, {"sell_price", p.sell_price}};
}

inline const char* cell_kind(const GridworldConfig& g, std::size_t s) {
    const Cell c{s / g.width, s % g.width};
    if (std::find(g.obstacles.begin(), g.obstacles.end(), c) != g.obstacles.end()) return "obstacle";
    if (std::find(g.goals.begin(), g.goals.end(), c) != g.goals.end()) return "goal";
    return "free";
}

}  // namespace detail

inline CsvTable policy_grid_table(const BuiltEnvironment& env, const CellEvaluation& ev) {
    if (env.is_inventory()) {
        const InventoryModel& m = *env.inventory;
        const auto oo = inventory_orders(m, ev.optimal_actions), eo = inventory_orders(m, ev.expert_actions),
                   ao = inventory_orders(m, ev.apprentice_actions);
        CsvTable t({"state", "optimal_order", "expert_order", "apprentice_order", "optimal_level", "expert_level",
                    "apprentice_level"});
        for (std::size_t s = 0; s < oo.size(); ++s) {
            t.row().add(s).add(oo[s]).add(eo[s]).add(ao[s]).add(s + oo[s]).add(s + eo[s]).add(s + ao[s]);
        }
        return t;
    }
    const GridworldConfig& g = *env.grid;
    CsvTable t({"state", "row", "col", "cell", "optimal_action", "expert_action", "apprentice_action"});
    for (std::size_t s = 0; s < g.height * g.width; ++s) {
        t.row().add(s).add(s / g.width).add(s % g.width).add(detail::cell_kind(g, s));
        t.add(kGridActionNames[ev.optimal_actions[s]]).add(kGridActionNames[ev.expert_actions[s]]);
        t.add(kGridActionNames[ev.apprentice_actions[s]]);
    }
    return t;
}

inline CsvTable cost_heatmap_table(const BuiltEnvironment& env, const RlfdProblem& problem, const SaddleIterate& mean,
                                   std::size_t action) {
    const GridworldConfig& g = *env.grid;
    CsvTable t({"row", "col", "learned_cost", "prior_cost", "true_cost"});
    for (std::size_t s = 0; s < g.height * g.width; ++s) {
        const auto k = static_cast<Eigen::Index>(s * 4 + action);
        t.row().add(s / g.width).add(s % g.width).add(mean.c(k)).add(problem.c_hat()(k)).add(env.true_cost(k));
    }
    return t;
}

inline nlohmann::json evaluation_json(const CellResult& r) {
    const CellEvaluation& e = r.eval;
    nlohmann::json j{{"id", r.spec.id},
                     {"alpha", r.spec.problem->alpha()},
                     {"runs", r.spec.runs},
                     {"iterations", r.spec.smd.iterations},
                     {"rho_true_apprentice", e.rho_true_apprentice},
                     {"rho_true_expert", e.rho_true_expert},
                     {"rho_true_optimal", e.rho_true_optimal},
                     {"rho_learned_expert", e.rho_learned_expert},
                     {"rho_learned_apprentice", e.rho_learned_apprentice},
                     {"rho_learned_optimal", e.rho_learned_optimal},
                     {"distance_prior", e.distance_prior},
                     {"l1_true", e.l1_true},
                     {"tradeoff_lhs", e.tradeoff_lhs},
                     {"gap", e.gap},
                     {"agreement_optimal", e.agreement_optimal},
                     {"agreement_expert", e.agreement_expert}};
    if (e.recovered) j["recovered_params"] = detail::params_json(*e.recovered);
    return j;
}

struct CellWriteOptions {
    bool policy_grid = true;
    bool heatmaps = true;
    bool iterates = true;
};

inline void write_cell(ArtifactSink& sink, const CellResult& r, const CellWriteOptions& opt = {}) {
    const std::string& dir = r.spec.dir;
    const std::string& id = r.spec.id;
    if (opt.iterates) {
        CsvTable fin({"block", "index", "value"});
        detail::add_blocks(fin, r.mean, std::nullopt);
        sink.csv(detail::join_rel(dir, "final.csv"), "final", id, fin);
        CsvTable per_run({"run", "block", "index", "value"});
        for (std::size_t k = 0; k < r.runs.size(); ++k) detail::add_blocks(per_run, r.runs[k].averaged, k);
        sink.csv(detail::join_rel(dir, "runs_final.csv"), "runs_final", id, per_run);
    }
    if (!r.trace.empty()) {
        const bool hull = r.spec.problem->cost_class().is_hull();
        std::vector<std::string> cols{"t", "l1_diff_c", "l1_diff_u", "l1_diff_mu"};
        if (hull) cols.push_back("l1_diff_w");
        CsvTable t(cols);
        for (const TraceRow& row : r.trace) {
            t.row().add(row.t).add(row.l1_c).add(row.l1_u).add(row.l1_mu);
            if (hull) t.add(row.l1_w);
        }
        sink.csv(detail::join_rel(dir, "trace.csv"), "trace", id, t);
    }
    if (!r.gaps.empty()) {
        CsvTable t({"t", "gap"});
        for (const GapRow& row : r.gaps) t.row().add(row.t).add(row.gap);
        sink.csv(detail::join_rel(dir, "gap.csv"), "gap", id, t);
    }
    if (opt.policy_grid) sink.csv(detail::join_rel(dir, "policy_grid.csv"), "policy_grid", id, policy_grid_table(*r.spec.env, r.eval));
    if (opt.heatmaps && r.spec.env->grid) {
        for (std::size_t a = 0; a < 4; ++a) {
            sink.csv(detail::join_rel(dir, std::string("cost_heatmap_") + kGridActionNames[a] + ".csv"), "cost_heatmap",
                     id, cost_heatmap_table(*r.spec.env, *r.spec.problem, r.mean, a));
        }
    }
    sink.json(detail::join_rel(dir, "summary.json"), "summary", id, evaluation_json(r));
}

inline nlohmann::json cell_header(const CellSpec& c) {
    const EstimatorBounds b = estimator_bounds(*c.problem);
    nlohmann::json j{{"id", c.id},
                     {"dir", c.dir},
                     {"alpha", c.problem->alpha()},
                     {"n_states", c.problem->n_states()},
                     {"n_actions", c.problem->n_actions()},
                     {"gamma", c.problem->gamma()},
                     {"cost_class", c.problem->cost_class().is_hull() ? "hull" : "box"},
                     {"runs", c.runs},
                     {"base_seed", c.base_seed},
                     {"iterations", c.smd.iterations},
                     {"eta_cu", c.smd.eta_cu},
                     {"eta_mu", c.smd.eta_mu},
                     {"epsilon", c.smd.epsilon},
                     {"bounds", {{"v_cu", b.v_cu}, {"z_mu", b.z_mu}, {"v_mu", b.v_mu}}}};
    if (c.theorem_t_min) j["theorem_t_min"] = *c.theorem_t_min;
    return j;
}

inline nlohmann::json environment_fingerprint() {
    nlohmann::json j{{"library_version", kLibraryVersion},
                     {"cplusplus", static_cast<long>(__cplusplus)},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"rng", "mt19937_64 seeded through splitmix64"},
                     {"float_format", "%.17g"}};
#if defined(__VERSION__)
    j["compiler"] = __VERSION__;
#endif
    return j;
}

// ---------------------------------------------------------------- experiment kinds

struct ExperimentOutcome {
    std::filesystem::path out_dir;
    nlohmann::json manifest;
    std::size_t cells = 0;
};

namespace detail {

inline constexpr std::uint64_t kPriorStream = 0x70726f7865ULL;
inline constexpr std::uint64_t kLayoutStream = 0x6c61796f7574ULL;

struct ProblemBundle {
    std::unique_ptr<BuiltEnvironment> env;
    Vector expert_mu;
    Vector c_hat;
};

inline ProblemBundle make_bundle(BuiltEnvironment env, const ExperimentConfig& cfg, Rng& prior_rng) {
    ProblemBundle b;
    b.env = std::make_unique<BuiltEnvironment>(std::move(env));
    b.expert_mu = build_expert(*b.env, cfg.expert);
    if (cfg.prior.type != PriorSpec::Type::Perturbed) b.c_hat = build_prior(*b.env, cfg.prior, prior_rng);
    return b;
}

inline CellSpec make_cell(const ExperimentConfig& cfg, const ProblemBundle& b, const Vector& c_hat, double alpha,
                          std::string id, std::string dir, bool hull = false) {
    CellSpec c;
    c.id = std::move(id);
    c.dir = std::move(dir);
    c.env = b.env.get();
    CostClass cc = hull ? CostClass::convex_hull(inventory_hull_basis(*b.env->inventory)) : CostClass::box();
    c.problem = std::make_shared<const RlfdProblem>(TransitionOracle(b.env->mdp), b.expert_mu, c_hat, alpha, std::move(cc));
    c.smd = make_smd_config(cfg.algorithm, *c.problem, &c.theorem_t_min);
    c.runs = cfg.algorithm.runs;
    c.base_seed = cfg.seed;
    return c;
}

inline CsvTable sweep_table(const std::vector<CellResult>& cells) {
    CsvTable t({"alpha", "distance_prior", "l1_true", "rho_true_apprentice", "rho_true_expert", "rho_true_optimal",
                "rho_learned_expert", "rho_learned_apprentice", "rho_learned_optimal", "tradeoff_lhs", "gap",
                "agreement_optimal"});
    for (const CellResult& r : cells) {
        const CellEvaluation& e = r.eval;
        t.row().add(r.spec.problem->alpha()).add(e.distance_prior).add(e.l1_true).add(e.rho_true_apprentice);
        t.add(e.rho_true_expert).add(e.rho_true_optimal).add(e.rho_learned_expert).add(e.rho_learned_apprentice);
        t.add(e.rho_learned_optimal).add(e.tradeoff_lhs).add(e.gap).add(e.agreement_optimal);
    }
    return t;
}

inline nlohmann::json layout_json(const GridworldConfig& g) {
    nlohmann::json obs = nlohmann::json::array(), goals = nlohmann::json::array();
    for (const Cell& c : g.obstacles) obs.push_back({c.row, c.col});
    for (const Cell& c : g.goals) goals.push_back({c.row, c.col});
    return {{"height", g.height}, {"width", g.width}, {"obstacles", obs}, {"goals", goals},
            {"wind_prob", g.wind_prob}, {"gamma", g.gamma}, {"goal_absorbing", g.goal_absorbing}};
}

}  // namespace detail

/// Builds every cell, runs it, writes artifacts plus header.json and manifest.json under opt.out_dir.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opt) {
    if (opt.out_dir.empty()) throw InvalidArgument("run_experiment: output directory is empty");
    std::filesystem::create_directories(opt.out_dir);
    ArtifactSink sink(opt.out_dir);
    nlohmann::json cell_headers = nlohmann::json::array();
    const AlgorithmSpec& alg = cfg.algorithm;
    std::size_t n_cells = 0;

    auto finish = [&](CellResult& r, const CellWriteOptions& w) {
        cell_headers.push_back(cell_header(r.spec));
        write_cell(sink, r, w);
        ++n_cells;
    };

    switch (cfg.kind) {
        case ExperimentKind::Single: {
            Rng prior_rng(cfg.seed ^ detail::kPriorStream);
            const auto b = detail::make_bundle(build_environment(cfg.environment), cfg, prior_rng);
            CellResult r = run_cell(detail::make_cell(cfg, b, b.c_hat, alg.alphas[0], "single", "", alg.hull), opt.workers);
            finish(r, {});
            break;
        }
        case ExperimentKind::AlphaSweep:
        case ExperimentKind::GridworldRegularization:
        case ExperimentKind::ConvergenceTrace:
        case ExperimentKind::GapTrace: {
            Rng prior_rng(cfg.seed ^ detail::kPriorStream);
            const auto b = detail::make_bundle(build_environment(cfg.environment), cfg, prior_rng);
            std::vector<CellResult> results;
            for (std::size_t i = 0; i < alg.alphas.size(); ++i) {
                const std::string dir = detail::indexed("alpha", i);
                CellResult r = run_cell(detail::make_cell(cfg, b, b.c_hat, alg.alphas[i], dir, dir), opt.workers);
                finish(r, {});
                r.runs.clear();
                results.push_back(std::move(r));
            }
            if (cfg.kind == ExperimentKind::AlphaSweep || cfg.kind == ExperimentKind::GridworldRegularization) {
                sink.csv("alpha_sweep.csv", "alpha_sweep", "", detail::sweep_table(results));
            }
            break;
        }
        case ExperimentKind::PriorPerturbation: {
            Rng unused(0);
            const auto b = detail::make_bundle(build_environment(cfg.environment), cfg, unused);
            const InventoryParams truth = b.env->inventory_config->params;
            const auto& zetas = cfg.prior.zetas;
            const std::size_t reps = cfg.prior.reps;
            CsvTable per_rep({"zeta_index", "zeta", "rep", "prior_order_cost", "prior_holding_cost", "prior_sell_price",
                              "order_cost", "holding_cost", "sell_price", "l1_true"});
            CsvTable sweep({"zeta", "order_cost", "holding_cost", "sell_price", "dev_order_cost", "dev_holding_cost",
                            "dev_sell_price", "l1_true"});
            for (std::size_t i = 0; i < zetas.size(); ++i) {
                KahanSum co, ch, cs, dco, dch, dcs, l1;
                for (std::size_t rep = 0; rep < reps; ++rep) {
                    Rng noise = Rng::for_run(cfg.seed ^ detail::kPriorStream, i * reps + rep);
                    const PerturbedPrior prior = perturb_inventory_prior(*b.env->inventory, truth, zetas[i], noise);
                    const std::string id = detail::indexed("zeta", i) + "_" + detail::indexed("rep", rep);
                    CellResult r = run_cell(detail::make_cell(cfg, b, prior.c_hat, alg.alphas[0], id, ""), opt.workers);
                    cell_headers.push_back(cell_header(r.spec));
                    ++n_cells;
                    const InventoryParams& p = *r.eval.recovered;
                    per_rep.row().add(i).add(zetas[i]).add(rep).add(prior.params.order_cost);
                    per_rep.add(prior.params.holding_cost).add(prior.params.sell_price).add(p.order_cost);
                    per_rep.add(p.holding_cost).add(p.sell_price).add(r.eval.l1_true);
                    co.add(p.order_cost);
                    ch.add(p.holding_cost);
                    cs.add(p.sell_price);
                    dco.add(std::abs(p.order_cost - truth.order_cost));
                    dch.add(std::abs(p.holding_cost - truth.holding_cost));
                    dcs.add(std::abs(p.sell_price - truth.sell_price));
                    l1.add(r.eval.l1_true);
                }
                const double m = static_cast<double>(reps);
                sweep.row().add(zetas[i]).add(co.value() / m).add(ch.value() / m).add(cs.value() / m);
                sweep.add(dco.value() / m).add(dch.value() / m).add(dcs.value() / m).add(l1.value() / m);
            }
            sink.csv("zeta_reps.csv", "zeta_reps", "", per_rep);
            sink.csv("zeta_sweep.csv", "zeta_sweep", "", sweep);
            break;
        }
        case ExperimentKind::HullComparison: {
            CsvTable cmp({"capacity", "mode", "rho_true_apprentice", "rho_true_expert", "rho_true_optimal",
                          "agreement_optimal", "final_l1_diff_c", "final_l1_diff_w"});
            for (const std::size_t cap : cfg.capacities) {
                InventoryConfig inv = cfg.environment.inventory;
                inv.capacity = cap;
                Rng prior_rng(cfg.seed ^ detail::kPriorStream);
                const auto b = detail::make_bundle(build_environment(inv), cfg, prior_rng);
                const std::string base = detail::indexed("M", cap);
                for (const bool hull : {false, true}) {
                    const std::string dir = base + (hull ? "/hull" : "/box");
                    CellResult r = run_cell(detail::make_cell(cfg, b, b.c_hat, 0.0, dir, dir, hull), opt.workers);
                    finish(r, {});
                    const double l1c = r.trace.empty() ? 0.0 : r.trace.back().l1_c;
                    const double l1w = r.trace.empty() ? 0.0 : r.trace.back().l1_w;
                    cmp.row().add(cap).add(hull ? "hull" : "box").add(r.eval.rho_true_apprentice);
                    cmp.add(r.eval.rho_true_expert).add(r.eval.rho_true_optimal).add(r.eval.agreement_optimal);
                    cmp.add(l1c).add(l1w);
                }
            }
            sink.csv("hull_compare.csv", "hull_compare", "", cmp);
            break;
        }
        case ExperimentKind::GridGallery: {
            const EnvironmentSpec& es = cfg.environment;
            CsvTable gallery({"layout", "n_obstacles", "n_goals", "rho_true_apprentice", "rho_true_expert",
                              "rho_true_optimal", "agreement_optimal", "agreement_expert"});
            for (std::size_t i = 0; i < es.random_layouts; ++i) {
                Rng layout_rng = Rng::for_run(cfg.seed ^ detail::kLayoutStream, i);
                const GridworldConfig layout =
                    random_gridworld_layout(es.grid, es.layout_obstacles, es.layout_goals, layout_rng);
                Rng prior_rng = Rng::for_run(cfg.seed ^ detail::kPriorStream, i);
                const auto b = detail::make_bundle(build_environment(layout), cfg, prior_rng);
                const std::string dir = detail::indexed("layout", i);
                CellResult r = run_cell(detail::make_cell(cfg, b, b.c_hat, alg.alphas[0], dir, dir), opt.workers);
                finish(r, {});
                sink.json(dir + "/layout.json", "layout", dir, detail::layout_json(layout));
                gallery.row().add(i).add(layout.obstacles.size()).add(layout.goals.size());
                gallery.add(r.eval.rho_true_apprentice).add(r.eval.rho_true_expert).add(r.eval.rho_true_optimal);
                gallery.add(r.eval.agreement_optimal).add(r.eval.agreement_expert);
            }
            sink.csv("gallery.csv", "gallery", "", gallery);
            break;
        }
    }

    nlohmann::json config_echo = cfg.resolved;
    config_echo["seed"] = cfg.seed;
    config_echo.erase("output_dir");
    const nlohmann::json header{{"kind", cfg.kind_name},
                                {"name", cfg.name},
                                {"config", config_echo},
                                {"fingerprint", environment_fingerprint()},
                                {"cells", cell_headers}};
    sink.json("header.json", "header", "", header);

    ExperimentOutcome out;
    out.out_dir = opt.out_dir;
    out.cells = n_cells;
    out.manifest = {{"kind", cfg.kind_name}, {"name", cfg.name}, {"files", sink.files()}};
    write_text_file(opt.out_dir / "manifest.json", out.manifest.dump(2) + "\n");
    return out;
}

/// MDP of the configured environment (the base layout for galleries).
inline Mdp experiment_mdp(const ExperimentConfig& cfg) {
    return cfg.environment.type == EnvironmentSpec::Type::Inventory
               ? build_inventory_mdp(cfg.environment.inventory).mdp
               : build_gridworld_mdp(cfg.environment.grid);
}

}  // namespace rlfd
