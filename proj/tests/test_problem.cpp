#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "rlfd/problem.hpp"
#include "test_support.hpp"

using namespace rlfd;
using namespace rlfd::testing_support;

namespace {

RlfdProblem make_problem(std::size_t n_s, std::size_t n_a, double gamma, double alpha, std::mt19937_64& gen) {
    auto mdp = std::make_shared<const Mdp>(random_mdp(n_s, n_a, gamma, gen));
    const Vector mu_e = occupancy_from_policy(*mdp, random_policy(n_s, n_a, gen)).mu;
    return RlfdProblem(TransitionOracle(mdp), mu_e, random_box(n_s * n_a, gen), alpha);
}

SaddleIterate random_point(const RlfdProblem& p, std::mt19937_64& gen) {
    return {random_box(p.n_pairs(), gen), random_box(p.n_states(), gen), random_simplex(p.n_pairs(), gen), {}};
}

// Dense oracle: alpha sum (c - c_hat)^2 + sum_{s,a} (mu_E - mu)(s,a) [c(s,a) - (u(s) - g sum_s' P u(s'))/(1-g)].
double dense_lagrangian(const RlfdProblem& p, const Mdp& m, const SaddleIterate& it) {
    double reg = 0.0, lin = 0.0;
    const double g = m.gamma();
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        for (std::size_t a = 0; a < m.n_actions(); ++a) {
            const auto i = static_cast<Eigen::Index>(s * m.n_actions() + a);
            double pu = 0.0;
            for (std::size_t sp = 0; sp < m.n_states(); ++sp) pu += m.transition()(i, static_cast<Eigen::Index>(sp)) * it.u(static_cast<Eigen::Index>(sp));
            const double slack = it.c(i) - (it.u(static_cast<Eigen::Index>(s)) - g * pu) / (1.0 - g);
            reg += (it.c(i) - p.c_hat()(i)) * (it.c(i) - p.c_hat()(i));
            lin += (p.expert_mu()(i) - it.mu(i)) * slack;
        }
    }
    return p.alpha() * reg + lin;
}

}  // namespace

TEST(RlfdProblem, RejectsInvalidInputs) {
    std::mt19937_64 gen(1);
    auto mdp = std::make_shared<const Mdp>(random_mdp(2, 2, 0.9, gen));
    const Vector mu_e = occupancy_from_policy(*mdp, Policy::uniform(2, 2)).mu;
    EXPECT_THROW(RlfdProblem(TransitionOracle(mdp), mu_e, Vector::Zero(4), -0.1), InvalidArgument);
    EXPECT_THROW(RlfdProblem(TransitionOracle(mdp), mu_e, Vector::Constant(4, 2.0), 0.1), InvalidArgument);
    EXPECT_THROW(RlfdProblem(TransitionOracle(mdp), Vector::Constant(4, 0.25), Vector::Zero(4), 0.1), InvalidArgument);
    EXPECT_THROW(RlfdProblem(TransitionOracle(mdp), mu_e, Vector::Zero(3), 0.1), DimensionError);
    EXPECT_THROW(RlfdProblem(TransitionOracle(mdp), mu_e, Vector::Zero(4), 0.0, CostClass::convex_hull(Matrix::Zero(4, 0))),
                 DimensionError);
    EXPECT_THROW(RlfdProblem(TransitionOracle(mdp), mu_e, Vector::Zero(4), 0.0, CostClass::convex_hull(Matrix::Constant(4, 1, 1.5))),
                 InvalidArgument);
    EXPECT_THROW(TransitionOracle(nullptr), InvalidArgument);
}

TEST(Lagrangian, ZeroWhenAlphaZeroAndMuIsExpert) {
    std::mt19937_64 gen(2);
    const RlfdProblem p = make_problem(3, 2, 0.9, 0.0, gen);
    SaddleIterate it = random_point(p, gen);
    it.mu = p.expert_mu();
    EXPECT_NEAR(lagrangian(p, it), 0.0, 1e-14);
}

TEST(Lagrangian, ZeroWhenCostIsProxyAndMuIsExpert) {
    std::mt19937_64 gen(3);
    const RlfdProblem p = make_problem(3, 2, 0.9, 0.7, gen);
    SaddleIterate it = random_point(p, gen);
    it.c = p.c_hat();
    it.mu = p.expert_mu();
    EXPECT_NEAR(lagrangian(p, it), 0.0, 1e-14);
}

TEST(Lagrangian, MatchesDenseReimplementation) {
    std::mt19937_64 gen(4);
    for (int k = 0; k < 20; ++k) {
        const RlfdProblem p = make_problem(2, 2, 0.8, 0.3, gen);
        const SaddleIterate it = random_point(p, gen);
        EXPECT_NEAR(lagrangian(p, it), dense_lagrangian(p, p.dynamics().exact("test"), it), 1e-12);
    }
}

TEST(Lagrangian, SampleOnlyOracleRefusesExactQuantities) {
    std::mt19937_64 gen(5);
    auto mdp = std::make_shared<const Mdp>(random_mdp(2, 2, 0.9, gen));
    const Vector mu_e = occupancy_from_policy(*mdp, Policy::uniform(2, 2)).mu;
    const RlfdProblem p(TransitionOracle::sample_only(mdp), mu_e, Vector::Zero(4), 0.1);
    EXPECT_THROW(lagrangian(p, default_iterate(p)), OracleError);
    EXPECT_THROW(exact_gradients(p, default_iterate(p)), OracleError);
    Rng rng(1);
    EXPECT_NO_THROW(grad_mu_estimate(p, default_iterate(p), rng));
}

TEST(ExactGradients, MatchFiniteDifferences) {
    std::mt19937_64 gen(6);
    const RlfdProblem p = make_problem(3, 2, 0.85, 0.4, gen);
    const SaddleIterate it = random_point(p, gen);
    const ExactGradients g = exact_gradients(p, it);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < it.c.size(); ++i) {
        SaddleIterate a = it, b = it;
        a.c(i) += h;
        b.c(i) -= h;
        EXPECT_NEAR((lagrangian(p, a) - lagrangian(p, b)) / (2 * h), g.c(i), 1e-6);
    }
    for (Eigen::Index i = 0; i < it.u.size(); ++i) {
        SaddleIterate a = it, b = it;
        a.u(i) += h;
        b.u(i) -= h;
        EXPECT_NEAR((lagrangian(p, a) - lagrangian(p, b)) / (2 * h), g.u(i), 1e-6);
    }
    // L is linear in mu with coefficient -(c - T^T u).
    for (Eigen::Index i = 0; i < it.mu.size(); ++i) {
        SaddleIterate a = it;
        a.mu(i) += 1.0;
        EXPECT_NEAR(lagrangian(p, a) - lagrangian(p, it), -g.mu(i), 1e-10);
    }
}

TEST(GradCuEstimate, UnbiasedInBothModes) {
    std::mt19937_64 gen(7);
    const RlfdProblem p = make_problem(2, 2, 0.7, 0.5, gen);
    const SaddleIterate it = random_point(p, gen);
    const ExactGradients ex = exact_gradients(p, it);
    const double v = estimator_bounds(p).v_cu;
    const int n = 1000000;
    for (EstimatorMode mode : {EstimatorMode::SampledCU, EstimatorMode::ExactCU}) {
        Rng rng(11);
        Vector sc = Vector::Zero(4), su = Vector::Zero(2);
        for (int i = 0; i < n; ++i) {
            const CuGradient g = grad_cu_estimate(p, it, mode, rng);
            sc += g.c;
            su += g.u;
        }
        const double tol = 5.0 * std::sqrt(v / n);
        EXPECT_LT((sc / n - ex.c).lpNorm<Eigen::Infinity>(), tol);
        EXPECT_LT((su / n - ex.u).lpNorm<Eigen::Infinity>(), tol);
    }
}

TEST(GradCuEstimate, AlphaZeroCostBlockIsIndicatorDifference) {
    std::mt19937_64 gen(8);
    const RlfdProblem p = make_problem(3, 2, 0.9, 0.0, gen);
    const SaddleIterate it = random_point(p, gen);
    Rng a(3), b(3);
    for (int i = 0; i < 200; ++i) {
        const CuDraw d = draw_cu(p, it.mu, EstimatorMode::SampledCU, a);
        const CuGradient g = cu_gradient_from_draw(p, it, d);
        Vector want = Vector::Zero(6);
        want(static_cast<Eigen::Index>(d.pair_e)) += 1.0;
        want(static_cast<Eigen::Index>(d.pair_t)) -= 1.0;
        EXPECT_EQ(g.c, want);
        // The convenience wrapper consumes the same draws.
        EXPECT_EQ(grad_cu_estimate(p, it, EstimatorMode::SampledCU, b).c, g.c);
    }
}

TEST(GradCuEstimate, RejectsNonDistributionMu) {
    std::mt19937_64 gen(9);
    const RlfdProblem p = make_problem(2, 2, 0.9, 0.1, gen);
    SaddleIterate it = random_point(p, gen);
    it.mu *= 2.0;
    Rng rng(1);
    EXPECT_THROW(grad_cu_estimate(p, it, EstimatorMode::ExactCU, rng), InvalidArgument);
}

TEST(GradMuEstimate, UnbiasedOnThreeStates) {
    std::mt19937_64 gen(10);
    const RlfdProblem p = make_problem(3, 2, 0.8, 0.2, gen);
    const SaddleIterate it = random_point(p, gen);
    const Vector exact = exact_gradients(p, it).mu;
    Rng rng(12);
    const int n = 1000000;
    Vector sum = Vector::Zero(6);
    for (int i = 0; i < n; ++i) sum += grad_mu_estimate(p, it, rng);
    EXPECT_LT((sum / n - exact).lpNorm<Eigen::Infinity>(), 5.0 * std::sqrt(estimator_bounds(p).v_mu / n));
}

TEST(GradMuEstimate, SupNormBoundOnEveryDraw) {
    std::mt19937_64 gen(11);
    const RlfdProblem p = make_problem(4, 3, 0.9, 0.2, gen);
    const double z = estimator_bounds(p).z_mu;
    Rng rng(13);
    for (int k = 0; k < 20; ++k) {
        SaddleIterate it = random_point(p, gen);
        it.c = Vector::Ones(12) * (k % 2 ? 1.0 : -1.0);
        it.u = Vector::Ones(4) * (k % 2 ? -1.0 : 1.0);
        for (int i = 0; i < 1000; ++i) ASSERT_LE(grad_mu_estimate(p, it, rng).lpNorm<Eigen::Infinity>(), z);
    }
}

TEST(GradMuEstimate, ZeroCostAndDualGiveZero) {
    std::mt19937_64 gen(12);
    const RlfdProblem p = make_problem(3, 2, 0.9, 0.2, gen);
    SaddleIterate it = random_point(p, gen);
    it.c.setZero();
    it.u.setZero();
    Rng rng(1);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(grad_mu_estimate(p, it, rng).lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(EstimatorBounds, KnownNumbers) {
    const EstimatorBounds b = estimator_bounds(0.0, 0.7, 16);
    EXPECT_NEAR(b.v_cu, 4.0 * 1.49 / 0.09 + 8.0, 1e-10);
    EXPECT_NEAR(b.v_cu, 74.2222222222, 1e-9);
    EXPECT_NEAR(b.v_mu, 16.0 * (2.0 + 4.0 * 1.49 / 0.09), 1e-9);
    EXPECT_NEAR(b.v_mu, 1091.5555555556, 1e-9);
    EXPECT_NEAR(b.z_mu, 32.0 / 0.3, 1e-12);
    EXPECT_NEAR(estimator_bounds(0.5, 0.7, 16).v_cu - b.v_cu, 64.0 * 0.25 * 16.0, 1e-10);
}

TEST(MirrorStepBox, ZeroGradientLeavesIterate) {
    Vector x(3);
    x << -0.3, 0.0, 0.9;
    const Vector before = x;
    mirror_step_box(x, Vector::Zero(3), 0.5);
    EXPECT_EQ(x, before);
}

TEST(MirrorStepBox, ProjectionClipsAtBoundary) {
    Vector x = Vector::Ones(3);
    mirror_step_box(x, -Vector::Ones(3), 0.1);
    EXPECT_EQ(x, Vector::Ones(3));
    Vector y(2);
    y << -0.95, 0.95;
    Vector g(2);
    g << 1.0, -1.0;
    mirror_step_box(y, g, 0.1);
    EXPECT_EQ(y(0), -1.0);
    EXPECT_EQ(y(1), 1.0);
}

TEST(MirrorStepBox, InteriorMatchesPlainStep) {
    Vector x(2), g(2);
    x << 0.2, -0.4;
    g << 0.3, -0.5;
    mirror_step_box(x, g, 0.01);
    EXPECT_DOUBLE_EQ(x(0), 0.2 - 0.003);
    EXPECT_DOUBLE_EQ(x(1), -0.4 + 0.005);
}

TEST(MirrorStepBox, RejectsBadArguments) {
    Vector x = Vector::Zero(2);
    EXPECT_THROW(mirror_step_box(x, Vector::Zero(3), 0.1), DimensionError);
    EXPECT_THROW(mirror_step_box(x, Vector::Zero(2), 0.0), InvalidArgument);
}

TEST(MirrorStepSimplex, HandComputedUpdate) {
    Vector mu(2), g(2);
    mu << 0.5, 0.5;
    g << std::log(2.0), 0.0;
    mirror_step_simplex(mu, g, 1.0);
    EXPECT_NEAR(mu(0), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(mu(1), 2.0 / 3.0, 1e-15);
}

TEST(MirrorStepSimplex, ShiftInvariance) {
    std::mt19937_64 gen(13);
    const Vector mu0 = random_simplex(5, gen);
    Vector a = mu0, b = mu0, c = mu0;
    mirror_step_simplex(a, Vector::Constant(5, 3.7), 0.4);
    mirror_step_simplex(b, Vector::Zero(5), 0.4);
    EXPECT_LT((a - mu0).lpNorm<Eigen::Infinity>(), 1e-15);
    EXPECT_LT((b - mu0).lpNorm<Eigen::Infinity>(), 1e-15);
    const Vector g = random_box(5, gen);
    Vector d = mu0;
    mirror_step_simplex(c, g, 0.4);
    mirror_step_simplex(d, g + Vector::Constant(5, -12.0), 0.4);
    EXPECT_LT((c - d).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(MirrorStepSimplex, HugeGradientStaysFinite) {
    Vector mu = Vector::Constant(4, 0.25);
    Vector g(4);
    g << 1e6, -1e6, 0.0, 0.0;
    mirror_step_simplex(mu, g, 1.0);
    EXPECT_TRUE(mu.allFinite());
    EXPECT_NEAR(mu.sum(), 1.0, 1e-15);
    EXPECT_GT(mu.minCoeff(), 0.0);
    EXPECT_NEAR(mu(1), 1.0, 1e-15);
}

TEST(MirrorStepSimplex, SingleCoordinateVersionAgreesWithDense) {
    std::mt19937_64 gen(14);
    for (int k = 0; k < 100; ++k) {
        const Vector mu0 = random_simplex(6, gen);
        const auto idx = static_cast<Eigen::Index>(k % 6);
        const double gv = 40.0 * (static_cast<double>(k % 7) - 3.0);
        Vector dense = mu0, single = mu0;
        Vector g = Vector::Zero(6);
        g(idx) = gv;
        mirror_step_simplex(dense, g, 0.05);
        mirror_step_simplex_single(single, idx, gv, 0.05);
        EXPECT_LT((dense - single).lpNorm<Eigen::Infinity>(), 1e-14);
    }
}

TEST(Iterates, DefaultAndRandomAreFeasible) {
    std::mt19937_64 gen(15);
    const RlfdProblem p = make_problem(3, 2, 0.9, 0.2, gen);
    const SaddleIterate d = default_iterate(p);
    EXPECT_EQ(d.c, p.c_hat());
    EXPECT_EQ(d.u, Vector::Zero(3));
    EXPECT_NEAR(d.mu.sum(), 1.0, 1e-15);
    Rng rng(5);
    for (int k = 0; k < 100; ++k) {
        const SaddleIterate r = random_iterate(p, rng);
        EXPECT_LE(r.c.lpNorm<Eigen::Infinity>(), 1.0);
        EXPECT_LE(r.u.lpNorm<Eigen::Infinity>(), 1.0);
        EXPECT_NEAR(r.mu.sum(), 1.0, 1e-12);
        EXPECT_GT(r.mu.minCoeff(), 0.0);
    }
}

TEST(Iterates, HullIterateLiesInHull) {
    std::mt19937_64 gen(16);
    auto mdp = std::make_shared<const Mdp>(random_mdp(2, 2, 0.9, gen));
    const Vector mu_e = occupancy_from_policy(*mdp, Policy::uniform(2, 2)).mu;
    Matrix basis(4, 3);
    basis << 1, 0, -1, 0, 1, 0.5, -1, 0, 0, 0.3, -0.3, 1;
    const RlfdProblem p(TransitionOracle(mdp), mu_e, Vector::Zero(4), 0.0, CostClass::convex_hull(basis));
    Rng rng(6);
    const SaddleIterate r = random_iterate(p, rng);
    ASSERT_TRUE(r.w.has_value());
    EXPECT_NEAR(r.w->sum(), 1.0, 1e-12);
    EXPECT_LT((r.c - basis * *r.w).lpNorm<Eigen::Infinity>(), 1e-15);
    EXPECT_LT((default_iterate(p).c - basis.rowwise().mean()).lpNorm<Eigen::Infinity>(), 1e-15);
}
