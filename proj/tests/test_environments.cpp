#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "rlfd/environments.hpp"
#include "test_support.hpp"

using namespace rlfd;

namespace {

// Poisson pmf by the ratio recursion p(d) = p(d - 1) lambda / d, optionally renormalized on {0..m}.
std::vector<double> pmf_oracle(double lambda, std::size_t m, bool truncated) {
    std::vector<double> p(m + 1);
    p[0] = std::exp(-lambda);
    for (std::size_t d = 1; d <= m; ++d) p[d] = p[d - 1] * lambda / static_cast<double>(d);
    if (truncated) {
        double total = 0.0;
        for (double x : p) total += x;
        for (double& x : p) x /= total;
    }
    return p;
}

double expected_min_oracle(const std::vector<double>& p, std::size_t level) {
    double acc = 0.0, below = 0.0;
    for (std::size_t d = 0; d < level && d < p.size(); ++d) {
        acc += static_cast<double>(d) * p[d];
        below += p[d];
    }
    return acc + static_cast<double>(level) * (1.0 - below);
}

std::vector<std::size_t> optimal_levels(const InventoryModel& model) {
    return inventory_levels(model, solve_forward_optimal(model.mdp, 1e-10).policy.argmax());
}

}  // namespace

TEST(Inventory, TransitionRowsAreStochastic) {
    for (DemandModel dm : {DemandModel::TruncatedAtCapacity, DemandModel::Full}) {
        InventoryConfig cfg;
        cfg.demand = dm;
        const InventoryModel model = build_inventory_mdp(cfg);
        const Vector sums = model.mdp.transition().rowwise().sum();
        EXPECT_LT((sums.array() - 1.0).abs().maxCoeff(), 1e-12);
        EXPECT_EQ(model.mdp.n_states(), 16u);
        EXPECT_EQ(model.mdp.n_actions(), 16u);
        EXPECT_NEAR(model.mdp.cost().lpNorm<Eigen::Infinity>(), 1.0, 1e-15);
    }
}

TEST(Inventory, OptimalPolicyRestocksToFourteen) {
    const InventoryModel model = build_inventory_mdp(InventoryConfig{});
    const auto levels = optimal_levels(model);
    for (std::size_t s = 0; s <= 13; ++s) EXPECT_EQ(levels[s], 14u) << "state " << s;
    EXPECT_EQ(levels[14], 14u);
    EXPECT_EQ(levels[15], 15u);
}

TEST(Inventory, FullStateCostMatchesDirectFormula) {
    for (DemandModel dm : {DemandModel::TruncatedAtCapacity, DemandModel::Full}) {
        InventoryConfig cfg;
        cfg.demand = dm;
        const InventoryModel model = build_inventory_mdp(cfg);
        const auto p = pmf_oracle(10.0, 15, dm == DemandModel::TruncatedAtCapacity);
        const double want = 0.5 * 15.0 - 15.0 * expected_min_oracle(p, 15);
        for (std::size_t a = 0; a < 16; ++a) {
            const double got = model.mdp.cost()(static_cast<Eigen::Index>(15 * 16 + a)) * model.scale.scale;
            EXPECT_NEAR(got, want, 1e-10);
        }
        EXPECT_EQ(model.effective_order[15 * 16 + 7], 0u);
    }
}

TEST(Inventory, FeatureModelReproducesRawCost) {
    InventoryConfig cfg;
    cfg.capacity = 9;
    cfg.demand_mean = 4.5;
    cfg.params = {2.0, 1.0, 9.0};
    const InventoryModel model = build_inventory_mdp(cfg);
    const auto p = pmf_oracle(4.5, 9, true);
    for (std::size_t s = 0; s <= 9; ++s) {
        for (std::size_t a = 0; a <= 9; ++a) {
            const double ae = static_cast<double>(std::min(a, 9 - s));
            const double raw = 2.0 * ae + 1.0 * (static_cast<double>(s) + ae) -
                               9.0 * expected_min_oracle(p, s + static_cast<std::size_t>(ae));
            const auto i = static_cast<Eigen::Index>(s * 10 + a);
            EXPECT_NEAR((model.features.row(i) * cfg.params.as_vector())(0), raw, 1e-10);
            EXPECT_NEAR(model.mdp.cost()(i) * model.scale.scale, raw, 1e-10);
        }
    }
}

TEST(Inventory, TailMassFoldsIntoEmptyShelf) {
    for (DemandModel dm : {DemandModel::TruncatedAtCapacity, DemandModel::Full}) {
        InventoryConfig cfg;
        cfg.demand = dm;
        const InventoryModel model = build_inventory_mdp(cfg);
        const auto p = pmf_oracle(10.0, 15, dm == DemandModel::TruncatedAtCapacity);
        for (std::size_t s = 0; s <= 15; ++s) {
            const std::size_t level = s + model.effective_order[s * 16];
            double cdf = 0.0;
            for (std::size_t d = 0; d < level; ++d) cdf += p[d];
            EXPECT_NEAR(model.mdp.transition()(static_cast<Eigen::Index>(s * 16), 0), 1.0 - cdf, 1e-12);
        }
    }
}

TEST(Inventory, ClampingMakesOverCapacityOrdersDuplicates) {
    const InventoryModel model = build_inventory_mdp(InventoryConfig{});
    const Matrix& p = model.mdp.transition();
    for (std::size_t s = 0; s <= 15; ++s) {
        const auto clamped = static_cast<Eigen::Index>(s * 16 + (15 - s));
        for (std::size_t a = 16 - s; a < 16; ++a) {
            const auto i = static_cast<Eigen::Index>(s * 16 + a);
            EXPECT_EQ(p.row(i), p.row(clamped));
            EXPECT_EQ(model.mdp.cost()(i), model.mdp.cost()(clamped));
        }
    }
    const auto acts = solve_forward_optimal(model.mdp, 1e-10).policy.argmax();
    for (std::size_t s = 0; s <= 15; ++s) EXPECT_LE(acts[s], 15 - s);
}

TEST(Inventory, MisspecifiedExpertKeepsLowerStock) {
    const InventoryConfig cfg;
    const OccupancyMeasure occ = make_misspecified_expert(cfg, {5.0, 8.0, 15.0});
    const InventoryModel model = build_inventory_mdp(cfg);
    EXPECT_TRUE(check_feasibility(model.mdp, occ, 1e-9).pass);
    const auto levels = inventory_levels(model, policy_from_occupancy(model.mdp, occ).argmax());
    std::size_t top = 0;
    for (std::size_t s = 0; s <= 13; ++s) top = std::max(top, levels[s]);
    EXPECT_LT(top, 14u);
}

TEST(Inventory, MisspecifiedWithTrueParamsIsOptimal) {
    const InventoryConfig cfg;
    const OccupancyMeasure occ = make_misspecified_expert(cfg, cfg.params);
    const InventoryModel model = build_inventory_mdp(cfg);
    EXPECT_LT((occ.mu - solve_forward_optimal(model.mdp).occupancy.mu).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Inventory, PerturbedPriorFollowsFormula) {
    const InventoryConfig cfg;
    const InventoryModel model = build_inventory_mdp(cfg);
    Rng a(99), b(99);
    const PerturbedPrior pp = perturb_inventory_prior(model, cfg.params, 10.0, a);
    const double u1 = b.uniform(-1.0, 1.0), u2 = b.uniform(-1.0, 1.0), u3 = b.uniform(-1.0, 1.0);
    EXPECT_DOUBLE_EQ(pp.params.order_cost, 3.0 + 10.0 * 0.3 * u1);
    EXPECT_DOUBLE_EQ(pp.params.holding_cost, 0.5 + 10.0 * 0.05 * u2);
    EXPECT_DOUBLE_EQ(pp.params.sell_price, 15.0 + 10.0 * 1.5 * u3);
    EXPECT_LE(pp.c_hat.lpNorm<Eigen::Infinity>(), 1.0);
    Rng c(5);
    const PerturbedPrior zero = perturb_inventory_prior(model, cfg.params, 0.0, c);
    EXPECT_LT((zero.c_hat - model.mdp.cost()).lpNorm<Eigen::Infinity>(), 1e-15);
    Rng d(5);
    EXPECT_THROW(perturb_inventory_prior(model, cfg.params, -1.0, d), InvalidArgument);
}

TEST(Inventory, PerturbationGrowsWithZetaOnAverage) {
    const InventoryConfig cfg;
    const InventoryModel model = build_inventory_mdp(cfg);
    std::vector<double> means;
    for (double zeta : {0.0, 2.5, 5.0, 7.5, 10.0}) {
        double acc = 0.0;
        for (std::uint64_t r = 0; r < 200; ++r) {
            Rng rng(r);
            acc += (perturb_inventory_prior(model, cfg.params, zeta, rng).c_hat - model.mdp.cost()).lpNorm<1>();
        }
        means.push_back(acc / 200.0);
    }
    EXPECT_EQ(means[0], 0.0);
    for (std::size_t i = 1; i < means.size(); ++i) EXPECT_GT(means[i], means[i - 1]);
}

TEST(Inventory, RecoverParamsExactly) {
    const InventoryConfig cfg;
    const InventoryModel model = build_inventory_mdp(cfg);
    const InventoryParams got = recover_inventory_params(model.mdp.cost(), model.features, model.scale);
    EXPECT_NEAR(got.order_cost, 3.0, 1e-8);
    EXPECT_NEAR(got.holding_cost, 0.5, 1e-8);
    EXPECT_NEAR(got.sell_price, 15.0, 1e-8);
    const InventoryParams wrong{5.0, 8.0, 15.0};
    const Vector c = inventory_raw_cost(model.features, wrong) / model.scale.scale;
    const InventoryParams back = recover_inventory_params(c, model.features, model.scale);
    EXPECT_NEAR(back.order_cost, 5.0, 1e-8);
    EXPECT_NEAR(back.holding_cost, 8.0, 1e-8);
    EXPECT_NEAR(back.sell_price, 15.0, 1e-8);
}

TEST(Inventory, RecoverRejectsRankDeficientFeatures) {
    Matrix f = Matrix::Ones(5, 3);
    EXPECT_THROW(recover_inventory_params(Vector::Zero(5), f, CostScale{}), NumericalError);
    EXPECT_THROW(recover_inventory_params(Vector::Zero(4), f, CostScale{}), DimensionError);
}

TEST(Inventory, HullBasisColumnsHaveUnitSupNorm) {
    const InventoryModel model = build_inventory_mdp(InventoryConfig{});
    const Matrix basis = inventory_hull_basis(model);
    ASSERT_EQ(basis.cols(), 3);
    for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(basis.col(j).lpNorm<Eigen::Infinity>(), 1.0, 1e-15);
}

TEST(Inventory, ConfigValidation) {
    InventoryConfig cfg;
    cfg.capacity = 0;
    EXPECT_THROW(build_inventory_mdp(cfg), InvalidArgument);
    cfg = {};
    cfg.demand_mean = 0.0;
    EXPECT_THROW(build_inventory_mdp(cfg), InvalidArgument);
    cfg = {};
    cfg.gamma = 1.0;
    EXPECT_THROW(build_inventory_mdp(cfg), InvalidArgument);
}

TEST(Gridworld, NoWindIsDeterministicAndWallsHold) {
    GridworldConfig g;
    g.height = 3;
    g.width = 3;
    g.wind_prob = 0.0;
    const Mdp m = build_gridworld_mdp(g);
    EXPECT_EQ(m.transition()(0 * 4 + Up, 0), 1.0);
    EXPECT_EQ(m.transition()(0 * 4 + Left, 0), 1.0);
    EXPECT_EQ(m.transition()(0 * 4 + Right, 1), 1.0);
    EXPECT_EQ(m.transition()(0 * 4 + Down, 3), 1.0);
    EXPECT_EQ(m.transition()(8 * 4 + Down, 8), 1.0);
}

TEST(Gridworld, WindDriftsWest) {
    GridworldConfig g;
    g.height = 3;
    g.width = 3;
    const Mdp m = build_gridworld_mdp(g);
    const Eigen::Index centre = 4;
    EXPECT_NEAR(m.transition()(centre * 4 + Up, 1), 0.8, 1e-15);
    EXPECT_NEAR(m.transition()(centre * 4 + Up, 3), 0.2, 1e-15);
    EXPECT_NEAR(m.transition()(centre * 4 + Left, 3), 1.0, 1e-15);
    EXPECT_NEAR(m.transition()(centre * 4 + Right, 5), 0.8, 1e-15);
    // West edge: the drift keeps the agent in place.
    EXPECT_NEAR(m.transition()(3 * 4 + Right, 3), 0.2, 1e-15);
    const Vector sums = m.transition().rowwise().sum();
    EXPECT_LT((sums.array() - 1.0).abs().maxCoeff(), 1e-15);
}

TEST(Gridworld, CostIsStateBased) {
    GridworldConfig g;
    g.obstacles = {{1, 1}, {2, 3}};
    g.goals = {{3, 3}};
    const Mdp m = build_gridworld_mdp(g);
    for (std::size_t a = 0; a < 4; ++a) {
        EXPECT_EQ(m.cost()(static_cast<Eigen::Index>(5 * 4 + a)), 1.0);
        EXPECT_EQ(m.cost()(static_cast<Eigen::Index>(11 * 4 + a)), 1.0);
        EXPECT_EQ(m.cost()(static_cast<Eigen::Index>(15 * 4 + a)), -1.0);
        EXPECT_EQ(m.cost()(static_cast<Eigen::Index>(0 * 4 + a)), 0.0);
    }
    EXPECT_NEAR(m.nu0().sum(), 1.0, 1e-15);
    EXPECT_EQ(m.nu0().minCoeff(), m.nu0().maxCoeff());
}

TEST(Gridworld, AbsorbingGoalsSelfLoop) {
    GridworldConfig g;
    g.goals = {{0, 0}};
    g.goal_absorbing = true;
    const Mdp m = build_gridworld_mdp(g);
    for (Eigen::Index a = 0; a < 4; ++a) EXPECT_EQ(m.transition()(a, 0), 1.0);
}

TEST(Gridworld, MalformedCellSetsAreRejected) {
    GridworldConfig g;
    g.obstacles = {{4, 0}};
    EXPECT_THROW(build_gridworld_mdp(g), InvalidArgument);
    g.obstacles = {{1, 1}, {1, 1}};
    EXPECT_THROW(build_gridworld_mdp(g), InvalidArgument);
    g.obstacles = {{1, 1}};
    g.goals = {{1, 1}};
    EXPECT_THROW(build_gridworld_mdp(g), InvalidArgument);
    g.goals = {};
    g.wind_prob = 1.0;
    EXPECT_THROW(build_gridworld_mdp(g), InvalidArgument);
}

TEST(Gridworld, RandomLayoutIsDisjointAndSeeded) {
    GridworldConfig base;
    base.height = 10;
    base.width = 10;
    Rng a(3), b(3);
    const GridworldConfig x = random_gridworld_layout(base, 12, 2, a);
    const GridworldConfig y = random_gridworld_layout(base, 12, 2, b);
    EXPECT_EQ(x.obstacles, y.obstacles);
    EXPECT_EQ(x.goals, y.goals);
    EXPECT_EQ(x.obstacles.size(), 12u);
    EXPECT_EQ(x.goals.size(), 2u);
    EXPECT_NO_THROW(x.validate());
    Rng c(1);
    EXPECT_THROW(random_gridworld_layout(base, 99, 2, c), InvalidArgument);
}

TEST(EarlyStopExpert, ConvergesToOptimalExpert) {
    GridworldConfig g;
    g.obstacles = {{1, 1}, {1, 3}, {2, 2}};
    g.goals = {{3, 3}};
    const Mdp m = build_gridworld_mdp(g);
    const auto iters = static_cast<std::size_t>(std::ceil(std::log(1e-9) / std::log(g.gamma)));
    const OccupancyMeasure early = make_earlystop_expert(m, iters);
    EXPECT_LT((early.mu - solve_forward_optimal(m, 1e-12).occupancy.mu).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(EarlyStopExpert, OneSweepIsMyopic) {
    GridworldConfig g;
    g.obstacles = {{0, 1}};
    g.goals = {{1, 0}};
    g.wind_prob = 0.0;
    const Mdp m = build_gridworld_mdp(g);
    // One sweep gives V = (1 - g) c; the greedy step then looks one move ahead.
    const auto one = policy_from_occupancy(m, make_earlystop_expert(m, 1)).argmax();
    EXPECT_EQ(one[g.state({0, 0})], static_cast<std::size_t>(Down));
    EXPECT_EQ(one[g.state({1, 1})], static_cast<std::size_t>(Left));
    EXPECT_EQ(one[g.state({3, 3})], static_cast<std::size_t>(Up));
    EXPECT_NE(one[g.state({0, 0})], static_cast<std::size_t>(Right));
}

TEST(EarlyStopExpert, AlwaysFeasible) {
    std::mt19937_64 gen(4);
    for (int k = 0; k < 20; ++k) {
        const Mdp m = testing_support::random_mdp(5, 3, 0.9, gen);
        EXPECT_TRUE(check_feasibility(m, make_earlystop_expert(m, 1 + k % 4), 1e-9).pass);
    }
    EXPECT_THROW(make_earlystop_expert(testing_support::one_state(0.5), 0), InvalidArgument);
}

TEST(PartialPrior, CountsAndExtremes) {
    GridworldConfig g;
    g.obstacles = {{0, 1}, {1, 1}, {2, 1}, {3, 1}};
    g.goals = {{3, 3}, {0, 3}};
    Rng r(1);
    EXPECT_EQ(make_partial_prior(g, 0.0, r).lpNorm<Eigen::Infinity>(), 0.0);
    EXPECT_EQ(make_partial_prior(g, 1.0, r), gridworld_cost(g));
    const Vector half = make_partial_prior(g, 0.5, r);
    EXPECT_EQ((half.array() == 1.0).count(), 2 * 4);
    EXPECT_EQ((half.array() == -1.0).count(), 1 * 4);
    Rng a(7), b(7);
    EXPECT_EQ(make_partial_prior(g, 0.5, a), make_partial_prior(g, 0.5, b));
    EXPECT_THROW(make_partial_prior(g, 1.5, r), InvalidArgument);
}
