#pragma once

// Stochastic mirror descent for the regularized saddle problem: Euclidean
// steps on the (c, u) box, entropic steps on the mu simplex, uniform
// averaging of the iterates t = 1..T.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "rlfd/gap.hpp"
#include "rlfd/problem.hpp"

namespace rlfd {

enum class InitMode {
    Default,  // c = c_hat (w uniform in hull mode), u = 0, mu uniform
    Random,   // box-uniform (c, u), Dirichlet(1) mu
};

struct SmdConfig {
    double epsilon = 0.1;
    double eta_cu = 1e-2;
    double eta_mu = 1e-2;
    std::size_t iterations = 1000;
    std::uint64_t seed = 0;
    EstimatorMode estimator_mode = EstimatorMode::ExactCU;
    InitMode init = InitMode::Default;
    std::optional<std::size_t> gap_every;    // exact gap of the running average
    std::optional<std::size_t> trace_every;  // l1 differences of the running average

    void validate() const {
        if (iterations == 0) throw InvalidArgument("SmdConfig: iterations must be >= 1");
        if (!(eta_cu > 0.0) || !(eta_mu > 0.0)) throw InvalidArgument("SmdConfig: step sizes must be positive");
        if (gap_every && *gap_every == 0) throw InvalidArgument("SmdConfig: gap_every must be >= 1");
        if (trace_every && *trace_every == 0) throw InvalidArgument("SmdConfig: trace_every must be >= 1");
    }
};

/// Step sizes and iteration count that the convergence theorem prescribes for accuracy epsilon.
struct TheoremSchedule {
    EstimatorBounds bounds;
    double eta_cu = 0.0;
    double eta_mu = 0.0;
    std::size_t t_min = 0;
};

/// eta = eps / (4 v) for both blocks; T_min = max(16 n b^2 / (eps eta_cu), 8 log m / (eps eta_mu))
/// with n = |S||A| + |S|, b = 1, m = |S||A|.
inline TheoremSchedule step_sizes_from_theorem(double alpha, double gamma, std::size_t n_states,
                                               std::size_t n_actions, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("step_sizes_from_theorem: epsilon must lie in (0, 1)");
    TheoremSchedule s;
    const std::size_t m = n_states * n_actions;
    s.bounds = estimator_bounds(alpha, gamma, m);
    s.eta_cu = epsilon / (4.0 * s.bounds.v_cu);
    s.eta_mu = epsilon / (4.0 * s.bounds.v_mu);
    const double n = static_cast<double>(m + n_states);
    const double t_cu = 16.0 * n / (epsilon * s.eta_cu);
    const double t_mu = 8.0 * std::log(static_cast<double>(m)) / (epsilon * s.eta_mu);
    s.t_min = static_cast<std::size_t>(std::ceil(std::max(t_cu, t_mu)));
    return s;
}

inline TheoremSchedule step_sizes_from_theorem(const RlfdProblem& problem, double epsilon) {
    return step_sizes_from_theorem(problem.alpha(), problem.gamma(), problem.n_states(),
                                   problem.n_actions(), epsilon);
}

/// Config with the theorem's step sizes and T = T_min.
inline SmdConfig theorem_config(const RlfdProblem& problem, double epsilon, std::uint64_t seed = 0) {
    const TheoremSchedule s = step_sizes_from_theorem(problem, epsilon);
    SmdConfig cfg;
    cfg.epsilon = epsilon;
    cfg.eta_cu = s.eta_cu;
    cfg.eta_mu = s.eta_mu;
    cfg.iterations = s.t_min;
    cfg.seed = seed;
    return cfg;
}

struct TraceRow {
    std::size_t t = 0;
    double l1_c = 0.0;
    double l1_u = 0.0;
    double l1_mu = 0.0;
    double l1_w = 0.0;  // hull mode only
};

struct GapRow {
    std::size_t t = 0;
    double gap = 0.0;
};

/// Outcome of a single run. Everything except `wall_seconds` is a pure function of (problem, config).
struct RunResult {
    SaddleIterate averaged;
    SaddleIterate last;
    std::vector<TraceRow> trace;
    std::vector<GapRow> gaps;
    EstimatorBounds bounds;
    double wall_seconds = 0.0;
};

/// Called after every iteration with the fresh (non-averaged) iterate.
using IterationObserver = std::function<void(std::size_t t, const SaddleIterate&)>;

namespace detail {

inline double l1_diff_of_average(const Vector& sum_prev, const Vector& current, std::size_t t) {
    // avg_t - avg_{t-1} = (x_t - avg_{t-1}) / t
    if (t == 1) return 0.0;
    const double prev_count = static_cast<double>(t - 1);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < current.size(); ++i) {
        acc += std::abs(current(i) - sum_prev(i) / prev_count);
    }
    return acc / static_cast<double>(t);
}

inline SaddleIterate average_of(const Vector& c_sum, const Vector& u_sum, const Vector& mu_sum,
                                const std::optional<Vector>& w_sum, std::size_t count) {
    const double k = static_cast<double>(count);
    SaddleIterate avg{c_sum / k, u_sum / k, mu_sum / k, std::nullopt};
    if (w_sum) avg.w = *w_sum / k;
    return avg;
}

inline void clip_unit(double& x) { x = std::clamp(x, -1.0, 1.0); }

}  // namespace detail

/// Runs T iterations of stochastic mirror descent and returns the averaged iterate.
/// Works for both cost classes; in hull mode the cost block is stepped on the
/// weight simplex with the pulled-back gradient C^T g_c.
inline RunResult run_smd(const RlfdProblem& problem, const SmdConfig& config,
                         const IterationObserver& observer = {}) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const bool hull = problem.cost_class().is_hull();
    const bool exact_cu = config.estimator_mode == EstimatorMode::ExactCU;
    if (config.gap_every) (void)problem.dynamics().exact("gap trace");

    Rng rng(config.seed);
    SaddleIterate it = config.init == InitMode::Random ? random_iterate(problem, rng) : default_iterate(problem);
    validate_distribution(it.mu, "run_smd initial iterate");

    const auto n = static_cast<Eigen::Index>(problem.n_pairs());
    const auto n_s = static_cast<Eigen::Index>(problem.n_states());
    const auto n_a = problem.n_actions();
    const double alpha = problem.alpha();
    const double gamma = problem.gamma();
    const double td_scale = 1.0 / (1.0 - gamma);
    const double n_pairs = static_cast<double>(problem.n_pairs());
    const Vector& c_hat = problem.c_hat();
    const Vector& mu_e = problem.expert_mu();

    Vector c_sum = Vector::Zero(n), u_sum = Vector::Zero(n_s), mu_sum = Vector::Zero(n);
    std::optional<Vector> w_sum;
    const Matrix* basis = hull ? &*problem.cost_class().hull : nullptr;
    if (hull) w_sum = Vector::Zero(basis->cols());
    Vector g_c(n);
    Vector g_w;

    RunResult result;
    result.bounds = estimator_bounds(problem);

    for (std::size_t t = 1; t <= config.iterations; ++t) {
        // Both gradients are taken at the iterate from step t - 1.
        const CuDraw cu = draw_cu(problem, it.mu, config.estimator_mode, rng);
        const MuDraw md = draw_mu(problem, rng);
        const double g_mu = mu_gradient_value(problem, it.c, it.u, md);

        if (exact_cu) {
            g_c = 2.0 * alpha * (it.c - c_hat) + mu_e - it.mu;
        } else {
            g_c.setZero();
            const auto k = static_cast<Eigen::Index>(*cu.uniform_pair);
            g_c(k) = n_pairs * 2.0 * alpha * (it.c(k) - c_hat(k));
            g_c(static_cast<Eigen::Index>(cu.pair_e)) += 1.0;
            g_c(static_cast<Eigen::Index>(cu.pair_t)) -= 1.0;
        }
        if (hull) {
            g_w = basis->transpose() * g_c;
            mirror_step_simplex(*it.w, g_w, config.eta_cu);
            it.c = *basis * *it.w;
        } else if (exact_cu) {
            it.c = (it.c - config.eta_cu * g_c).cwiseMax(-1.0).cwiseMin(1.0);
        } else {
            for (const std::size_t idx : {*cu.uniform_pair, cu.pair_e, cu.pair_t}) {
                const auto i = static_cast<Eigen::Index>(idx);
                if (g_c(i) != 0.0) {
                    it.c(i) -= config.eta_cu * g_c(i);
                    detail::clip_unit(it.c(i));
                    g_c(i) = 0.0;  // coordinates may repeat; apply each once
                }
            }
        }

        // u-block: (e_{s_t} - g e_{s'_t} - e_{s_E} + g e_{s'_E}) / (1 - g), touching at most four entries.
        {
            const auto s_t = static_cast<Eigen::Index>(cu.pair_t / n_a);
            const auto s_e = static_cast<Eigen::Index>(cu.pair_e / n_a);
            const auto nx_t = static_cast<Eigen::Index>(cu.next_t);
            const auto nx_e = static_cast<Eigen::Index>(cu.next_e);
            double g_u[4] = {td_scale, -td_scale * gamma, -td_scale, td_scale * gamma};
            const Eigen::Index idx[4] = {s_t, nx_t, s_e, nx_e};
            // Merge repeated coordinates before stepping so the update equals the dense one.
            for (int a = 0; a < 4; ++a) {
                for (int b = a + 1; b < 4; ++b) {
                    if (idx[b] == idx[a]) {
                        g_u[a] += g_u[b];
                        g_u[b] = 0.0;
                    }
                }
            }
            for (int a = 0; a < 4; ++a) {
                if (g_u[a] != 0.0) {
                    it.u(idx[a]) -= config.eta_cu * g_u[a];
                    detail::clip_unit(it.u(idx[a]));
                }
            }
        }

        mirror_step_simplex_single(it.mu, static_cast<Eigen::Index>(md.pair), g_mu, config.eta_mu);

        if (config.trace_every && t % *config.trace_every == 0) {
            TraceRow row;
            row.t = t;
            row.l1_c = detail::l1_diff_of_average(c_sum, it.c, t);
            row.l1_u = detail::l1_diff_of_average(u_sum, it.u, t);
            row.l1_mu = detail::l1_diff_of_average(mu_sum, it.mu, t);
            if (hull) row.l1_w = detail::l1_diff_of_average(*w_sum, *it.w, t);
            result.trace.push_back(row);
        }

        c_sum += it.c;
        u_sum += it.u;
        mu_sum += it.mu;
        if (hull) *w_sum += *it.w;

        if (observer) observer(t, it);

        if (config.gap_every && t % *config.gap_every == 0) {
            const SaddleIterate avg = detail::average_of(c_sum, u_sum, mu_sum, w_sum, t);
            result.gaps.push_back({t, duality_gap_exact(problem, avg)});
        }
    }

    result.averaged = detail::average_of(c_sum, u_sum, mu_sum, w_sum, config.iterations);
    result.last = std::move(it);
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

/// Box cost class entry point.
inline RunResult run_smd_rlfd(const RlfdProblem& problem, const SmdConfig& config,
                              const IterationObserver& observer = {}) {
    if (problem.cost_class().is_hull()) throw InvalidArgument("run_smd_rlfd: problem uses the hull cost class");
    return run_smd(problem, config, observer);
}

/// Convex-hull cost class entry point: c = C w with w on the simplex.
inline RunResult run_smd_hull(const RlfdProblem& problem, const SmdConfig& config,
                              const IterationObserver& observer = {}) {
    if (!problem.cost_class().is_hull()) throw InvalidArgument("run_smd_hull: problem has no hull basis");
    return run_smd(problem, config, observer);
}

}  // namespace rlfd
