#pragma once

// Benchmark MDPs: single-product inventory control with Poisson demand and a
// windy gridworld, plus the experts and proxy costs built on top of them.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "rlfd/mdp.hpp"
#include "rlfd/sampling.hpp"

namespace rlfd {

// ---------------------------------------------------------------- inventory

struct InventoryParams {
    double order_cost = 3.0;    // c_o
    double holding_cost = 0.5;  // c_h
    double sell_price = 15.0;   // c_s

    Vector as_vector() const { return Vector{{order_cost, holding_cost, sell_price}}; }
    bool operator==(const InventoryParams&) const = default;
};

/// Demand law: Poisson restricted to {0..M} and renormalized, or the untruncated Poisson.
enum class DemandModel { TruncatedAtCapacity, Full };

struct InventoryConfig {
    std::size_t capacity = 15;  // M
    double demand_mean = 10.0;  // lambda
    DemandModel demand = DemandModel::TruncatedAtCapacity;
    InventoryParams params;
    double gamma = 0.9;

    void validate() const {
        if (capacity < 1) throw InvalidArgument("InventoryConfig: capacity must be >= 1");
        if (!(demand_mean > 0.0) || !std::isfinite(demand_mean)) {
            throw InvalidArgument("InventoryConfig: demand mean must be positive");
        }
        if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("InventoryConfig: gamma must lie in (0, 1)");
    }
};

/// Maps currency-valued costs into the unit box and back.
struct CostScale {
    double scale = 1.0;

    Vector normalize(const Vector& raw) const { return raw / scale; }
    Vector denormalize(const Vector& unit) const { return unit * scale; }
};

struct InventoryModel {
    Mdp mdp;
    CostScale scale;
    Matrix features;  // rows [a_eff, s + a_eff, -E[min(s + a_eff, D)]]
    std::vector<std::size_t> effective_order;  // a_eff per flattened (s, a)
};

namespace detail {

/// Poisson pmf for d = 0..n-1, accumulated in the log domain.
inline std::vector<double> poisson_pmf(double lambda, std::size_t n) {
    std::vector<double> pmf(n);
    const double log_lambda = std::log(lambda);
    for (std::size_t d = 0; d < n; ++d) {
        pmf[d] = std::exp(-lambda + static_cast<double>(d) * log_lambda - std::lgamma(static_cast<double>(d) + 1.0));
    }
    return pmf;
}

/// Demand pmf on d = 0..M+1; the entries past the support are zero for the truncated law.
inline std::vector<double> demand_pmf(const InventoryConfig& cfg) {
    std::vector<double> pmf = poisson_pmf(cfg.demand_mean, cfg.capacity + 2);
    if (cfg.demand == DemandModel::TruncatedAtCapacity) {
        pmf.back() = 0.0;
        double total = 0.0;
        for (double p : pmf) total += p;
        for (double& p : pmf) p /= total;
    }
    return pmf;
}

/// P(D >= level), computed from the upper tail so that it stays accurate when small.
inline double poisson_tail(const std::vector<double>& pmf, std::size_t level) {
    double below = 0.0;
    for (std::size_t d = 0; d < level; ++d) below += pmf[d];
    return std::max(0.0, 1.0 - below);
}

/// E[min(level, D)] = sum_{d < level} d p(d) + level P(D >= level).
inline double expected_sales(const std::vector<double>& pmf, std::size_t level) {
    double acc = 0.0;
    for (std::size_t d = 0; d < level; ++d) acc += static_cast<double>(d) * pmf[d];
    return acc + static_cast<double>(level) * poisson_tail(pmf, level);
}

}  // namespace detail

/// Unnormalized features and effective orders for capacity M; actions are clamped to a_eff = min(a, M - s).
inline Matrix inventory_features(const InventoryConfig& cfg, std::vector<std::size_t>* effective = nullptr) {
    cfg.validate();
    const std::size_t n = cfg.capacity + 1;
    const auto pmf = detail::demand_pmf(cfg);
    Matrix feat(static_cast<Eigen::Index>(n * n), 3);
    if (effective) effective->assign(n * n, 0);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t a = 0; a < n; ++a) {
            const std::size_t a_eff = std::min(a, cfg.capacity - s);
            const std::size_t level = s + a_eff;
            const auto row = static_cast<Eigen::Index>(s * n + a);
            feat(row, 0) = static_cast<double>(a_eff);
            feat(row, 1) = static_cast<double>(level);
            feat(row, 2) = -detail::expected_sales(pmf, level);
            if (effective) (*effective)[s * n + a] = a_eff;
        }
    }
    return feat;
}

/// Cost c(s, a) = c_o a + c_h (s + a) - c_s E[min(s + a, D)] in currency units.
inline Vector inventory_raw_cost(const Matrix& features, const InventoryParams& p) {
    return features * p.as_vector();
}

inline InventoryModel build_inventory_mdp(const InventoryConfig& cfg) {
    std::vector<std::size_t> effective;
    Matrix features = inventory_features(cfg, &effective);
    const std::size_t n = cfg.capacity + 1;
    const auto pmf = detail::demand_pmf(cfg);

    Matrix p = Matrix::Zero(static_cast<Eigen::Index>(n * n), static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t a = 0; a < n; ++a) {
            const std::size_t level = s + effective[s * n + a];
            const auto row = static_cast<Eigen::Index>(s * n + a);
            // s' = level - d for d < level; every d >= level empties the shelf.
            for (std::size_t d = 0; d < level; ++d) p(row, static_cast<Eigen::Index>(level - d)) = pmf[d];
            p(row, 0) = detail::poisson_tail(pmf, level);
        }
    }

    const Vector raw = inventory_raw_cost(features, cfg.params);
    const double scale = raw.lpNorm<Eigen::Infinity>();
    if (!(scale > 0.0)) throw InvalidArgument("build_inventory_mdp: cost vector is identically zero");
    CostScale cs{scale};
    Vector nu0 = Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
    Mdp mdp(n, n, std::move(p), std::move(nu0), cs.normalize(raw), cfg.gamma);
    return {std::move(mdp), cs, std::move(features), std::move(effective)};
}

/// Cost vector for `params`, expressed in the unit scale of `model`. Entries beyond the box are clipped.
inline Vector inventory_cost_in_scale(const InventoryModel& model, const InventoryParams& params) {
    return model.scale.normalize(inventory_raw_cost(model.features, params)).cwiseMax(-1.0).cwiseMin(1.0);
}

/// Hull basis [c^o | c^h | c^s], each column scaled to sup-norm 1.
inline Matrix inventory_hull_basis(const InventoryModel& model) {
    Matrix basis = model.features;
    for (Eigen::Index j = 0; j < basis.cols(); ++j) {
        const double m = basis.col(j).lpNorm<Eigen::Infinity>();
        if (m > 0.0) basis.col(j) /= m;
    }
    return basis;
}

/// Order-up-to level implied by a deterministic policy at each state, s + a_eff.
inline std::vector<std::size_t> inventory_levels(const InventoryModel& model, const std::vector<std::size_t>& actions) {
    const std::size_t n = model.mdp.n_actions();
    std::vector<std::size_t> levels(actions.size());
    for (std::size_t s = 0; s < actions.size(); ++s) levels[s] = s + model.effective_order[s * n + actions[s]];
    return levels;
}

/// Effective order quantity per state for a deterministic policy.
inline std::vector<std::size_t> inventory_orders(const InventoryModel& model, const std::vector<std::size_t>& actions) {
    const std::size_t n = model.mdp.n_actions();
    std::vector<std::size_t> orders(actions.size());
    for (std::size_t s = 0; s < actions.size(); ++s) orders[s] = model.effective_order[s * n + actions[s]];
    return orders;
}

/// Exact occupancy of a policy that is optimal for the wrong parameters.
inline OccupancyMeasure make_misspecified_expert(const InventoryConfig& cfg, const InventoryParams& wrong) {
    InventoryConfig other = cfg;
    other.params = wrong;
    const InventoryModel model = build_inventory_mdp(other);
    return solve_forward_optimal(model.mdp).occupancy;
}

struct PerturbedPrior {
    InventoryParams params;
    Vector c_hat;
};

/// c_hat parameters (3 + 0.3 zeta u1, 0.5 + 0.05 zeta u2, 15 + 1.5 zeta u3) relative to
/// the configured truth, u_i ~ U[-1, 1].
inline PerturbedPrior perturb_inventory_prior(const InventoryModel& model, const InventoryParams& truth,
                                              double zeta, Rng& rng) {
    if (!(zeta >= 0.0)) throw InvalidArgument("perturb_inventory_prior: zeta must be non-negative");
    const double u1 = rng.uniform(-1.0, 1.0);
    const double u2 = rng.uniform(-1.0, 1.0);
    const double u3 = rng.uniform(-1.0, 1.0);
    PerturbedPrior out;
    out.params = {truth.order_cost + zeta * 0.1 * truth.order_cost * u1,
                  truth.holding_cost + zeta * 0.1 * truth.holding_cost * u2,
                  truth.sell_price + zeta * 0.1 * truth.sell_price * u3};
    out.c_hat = inventory_cost_in_scale(model, out.params);
    return out;
}

/// Least-squares fit of (c_o, c_h, c_s) to a learned unit-scale cost vector.
inline InventoryParams recover_inventory_params(const Vector& c_learned, const Matrix& features,
                                                const CostScale& scale) {
    detail::require_size(static_cast<std::size_t>(c_learned.size()), static_cast<std::size_t>(features.rows()),
                         "recover_inventory_params");
    const Eigen::ColPivHouseholderQR<Matrix> qr(features);
    if (qr.rank() < features.cols()) throw NumericalError("recover_inventory_params: feature matrix is rank deficient");
    const Vector x = qr.solve(scale.denormalize(c_learned));
    return {x(0), x(1), x(2)};
}

// ---------------------------------------------------------------- gridworld

struct Cell {
    std::size_t row = 0;
    std::size_t col = 0;
    auto operator<=>(const Cell&) const = default;
};

enum GridAction : std::size_t { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr std::array<const char*, 4> kGridActionNames{"up", "down", "left", "right"};

struct GridworldConfig {
    std::size_t height = 4;
    std::size_t width = 4;
    std::vector<Cell> obstacles;
    std::vector<Cell> goals;
    double wind_prob = 0.2;
    double gamma = 0.7;
    bool goal_absorbing = false;

    std::size_t state(const Cell& c) const { return c.row * width + c.col; }

    void validate() const {
        if (height == 0 || width == 0) throw InvalidArgument("GridworldConfig: grid must be non-empty");
        if (!(wind_prob >= 0.0 && wind_prob < 1.0)) throw InvalidArgument("GridworldConfig: wind_prob must lie in [0, 1)");
        if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("GridworldConfig: gamma must lie in (0, 1)");
        std::set<Cell> seen_obstacles;
        for (const Cell& c : obstacles) {
            if (c.row >= height || c.col >= width) throw InvalidArgument("GridworldConfig: obstacle outside the grid");
            if (!seen_obstacles.insert(c).second) throw InvalidArgument("GridworldConfig: duplicate obstacle cell");
        }
        std::set<Cell> seen_goals;
        for (const Cell& c : goals) {
            if (c.row >= height || c.col >= width) throw InvalidArgument("GridworldConfig: goal outside the grid");
            if (!seen_goals.insert(c).second) throw InvalidArgument("GridworldConfig: duplicate goal cell");
            if (seen_obstacles.count(c)) throw InvalidArgument("GridworldConfig: cell is both obstacle and goal");
        }
    }
};

namespace detail {

inline Cell grid_move(const GridworldConfig& g, Cell c, std::size_t action) {
    switch (action) {
        case Up: if (c.row > 0) --c.row; break;
        case Down: if (c.row + 1 < g.height) ++c.row; break;
        case Left: if (c.col > 0) --c.col; break;
        case Right: if (c.col + 1 < g.width) ++c.col; break;
        default: throw InvalidArgument("grid_move: unknown action");
    }
    return c;
}

}  // namespace detail

/// Per-state cost (+1 obstacle, -1 goal, 0 otherwise) replicated over the four actions.
inline Vector gridworld_cost(const GridworldConfig& cfg) {
    Vector cost = Vector::Zero(static_cast<Eigen::Index>(cfg.height * cfg.width * 4));
    for (const Cell& c : cfg.obstacles) cost.segment(static_cast<Eigen::Index>(cfg.state(c) * 4), 4).setConstant(1.0);
    for (const Cell& c : cfg.goals) cost.segment(static_cast<Eigen::Index>(cfg.state(c) * 4), 4).setConstant(-1.0);
    return cost;
}

inline Mdp build_gridworld_mdp(const GridworldConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.height * cfg.width;
    std::set<Cell> goals(cfg.goals.begin(), cfg.goals.end());
    Matrix p = Matrix::Zero(static_cast<Eigen::Index>(n * 4), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < cfg.height; ++r) {
        for (std::size_t c = 0; c < cfg.width; ++c) {
            const Cell here{r, c};
            const std::size_t s = cfg.state(here);
            for (std::size_t a = 0; a < 4; ++a) {
                const auto row = static_cast<Eigen::Index>(s * 4 + a);
                if (cfg.goal_absorbing && goals.count(here)) {
                    p(row, static_cast<Eigen::Index>(s)) = 1.0;
                    continue;
                }
                // Intended and drifted destinations merge when they coincide.
                p(row, static_cast<Eigen::Index>(cfg.state(detail::grid_move(cfg, here, a)))) += 1.0 - cfg.wind_prob;
                p(row, static_cast<Eigen::Index>(cfg.state(detail::grid_move(cfg, here, Left)))) += cfg.wind_prob;
            }
        }
    }
    Vector nu0 = Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
    return Mdp(n, 4, std::move(p), std::move(nu0), gridworld_cost(cfg), cfg.gamma);
}

/// Obstacles and goals placed uniformly at random without overlap.
inline GridworldConfig random_gridworld_layout(GridworldConfig base, std::size_t n_obstacles, std::size_t n_goals,
                                               Rng& rng) {
    const std::size_t n = base.height * base.width;
    if (n_obstacles + n_goals > n) throw InvalidArgument("random_gridworld_layout: too many special cells");
    std::vector<std::size_t> cells(n);
    std::iota(cells.begin(), cells.end(), std::size_t{0});
    for (std::size_t i = 0; i < n_obstacles + n_goals; ++i) std::swap(cells[i], cells[i + rng.index(n - i)]);
    base.obstacles.clear();
    base.goals.clear();
    for (std::size_t i = 0; i < n_obstacles + n_goals; ++i) {
        const Cell c{cells[i] / base.width, cells[i] % base.width};
        (i < n_obstacles ? base.obstacles : base.goals).push_back(c);
    }
    return base;
}

/// Greedy policy of `iters` value-iteration sweeps started from V = 0, returned as its exact occupancy.
inline OccupancyMeasure make_earlystop_expert(const Mdp& mdp, std::size_t iters) {
    if (iters < 1) throw InvalidArgument("make_earlystop_expert: iters must be >= 1");
    Vector v = Vector::Zero(static_cast<Eigen::Index>(mdp.n_states()));
    for (std::size_t k = 0; k < iters; ++k) v = bellman_backup(mdp, mdp.cost(), v);
    return occupancy_from_policy(mdp, greedy_policy(mdp, mdp.cost(), v));
}

/// Proxy cost that keeps round(fraction * count) randomly chosen obstacle (+1) and goal (-1) cells.
inline Vector make_partial_prior(const GridworldConfig& cfg, double fraction, Rng& rng) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidArgument("make_partial_prior: fraction must lie in [0, 1]");
    cfg.validate();
    Vector c_hat = Vector::Zero(static_cast<Eigen::Index>(cfg.height * cfg.width * 4));
    auto mark = [&](std::vector<Cell> cells, double value) {
        const auto keep = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(cells.size()) + 0.5));
        for (std::size_t i = 0; i < keep; ++i) {
            std::swap(cells[i], cells[i + rng.index(cells.size() - i)]);
            c_hat.segment(static_cast<Eigen::Index>(cfg.state(cells[i]) * 4), 4).setConstant(value);
        }
    };
    mark(cfg.obstacles, 1.0);
    mark(cfg.goals, -1.0);
    return c_hat;
}

}  // namespace rlfd
