#pragma once

// The regularized inverse problem
//
//   min_{(c,u) in box} max_{mu in simplex}  alpha ||c - c_hat||^2 + <mu_E - mu, c - T^T u>
//
// together with its stochastic gradient estimators and the bounds on them.

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rlfd/mdp.hpp"
#include "rlfd/sampling.hpp"

namespace rlfd {

/// Generative access to P(. | s, a). Exact access can be withheld to model a
/// pure sampling oracle; diagnostics that need the matrices then refuse to run.
class TransitionOracle {
public:
    explicit TransitionOracle(std::shared_ptr<const Mdp> mdp, bool exact_access = true)
        : mdp_(std::move(mdp)), exact_access_(exact_access) {
        if (!mdp_) throw InvalidArgument("TransitionOracle: null MDP");
        const Matrix& p = mdp_->transition();
        rows_.reserve(mdp_->n_pairs());
        std::vector<double> row(mdp_->n_states());
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
            for (Eigen::Index s = 0; s < p.cols(); ++s) row[static_cast<std::size_t>(s)] = p(r, s);
            rows_.emplace_back(row);
        }
    }

    static TransitionOracle sample_only(std::shared_ptr<const Mdp> mdp) {
        return TransitionOracle(std::move(mdp), false);
    }

    std::size_t n_states() const { return mdp_->n_states(); }
    std::size_t n_actions() const { return mdp_->n_actions(); }
    std::size_t n_pairs() const { return mdp_->n_pairs(); }
    double gamma() const { return mdp_->gamma(); }
    bool has_exact_access() const { return exact_access_; }

    /// Next state for the flattened pair index.
    std::size_t sample_next(std::size_t pair, Rng& rng) const { return rows_[pair].sample(rng); }

    const Mdp& exact(const char* who) const {
        if (!exact_access_) throw OracleError(std::string(who) + " requires exact dynamics");
        return *mdp_;
    }

private:
    std::shared_ptr<const Mdp> mdp_;
    bool exact_access_;
    std::vector<AliasTable> rows_;
};

/// Cost class: the box B_1 over S x A, or the convex hull of the columns of C.
struct CostClass {
    std::optional<Matrix> hull;  // |S||A| x n_c when set

    static CostClass box() { return {}; }
    static CostClass convex_hull(Matrix basis) { return {std::move(basis)}; }
    bool is_hull() const { return hull.has_value(); }
};

/// Inverse problem instance: dynamics oracle, expert occupancy, proxy cost, regularization weight.
class RlfdProblem {
public:
    RlfdProblem(TransitionOracle dynamics, Vector expert_mu, Vector c_hat, double alpha,
                CostClass cost_class = CostClass::box())
        : dynamics_(std::move(dynamics)),
          expert_mu_(std::move(expert_mu)),
          c_hat_(std::move(c_hat)),
          alpha_(alpha),
          cost_class_(std::move(cost_class)) {
        const std::size_t n = dynamics_.n_pairs();
        detail::require_size(static_cast<std::size_t>(expert_mu_.size()), n, "RlfdProblem expert_mu");
        detail::require_size(static_cast<std::size_t>(c_hat_.size()), n, "RlfdProblem c_hat");
        if (!(alpha_ >= 0.0)) throw InvalidArgument("RlfdProblem: alpha must be non-negative");
        if (!c_hat_.allFinite() || c_hat_.lpNorm<Eigen::Infinity>() > 1.0) {
            throw InvalidArgument("RlfdProblem: proxy cost must lie in [-1, 1]");
        }
        if ((expert_mu_.array() < 0.0).any() || std::abs(expert_mu_.sum() - 1.0) > 1e-10) {
            throw InvalidArgument("RlfdProblem: expert occupancy is not a distribution");
        }
        if (dynamics_.has_exact_access()) {
            const auto report = check_feasibility(dynamics_.exact("RlfdProblem"), expert_mu_, 1e-9);
            if (!report.pass) throw InvalidArgument("RlfdProblem: expert occupancy is not feasible");
        }
        if (cost_class_.is_hull()) {
            const Matrix& c = *cost_class_.hull;
            if (c.rows() != static_cast<Eigen::Index>(n) || c.cols() == 0) {
                throw DimensionError("RlfdProblem: hull basis must be |S||A| x n_c with n_c >= 1");
            }
            if (c.lpNorm<Eigen::Infinity>() > 1.0) {
                throw InvalidArgument("RlfdProblem: hull basis columns must have sup-norm <= 1");
            }
        }
        expert_sampler_ = AliasTable(std::span<const double>(expert_mu_.data(), n));
    }

    const TransitionOracle& dynamics() const { return dynamics_; }
    const Vector& expert_mu() const { return expert_mu_; }
    const Vector& c_hat() const { return c_hat_; }
    double alpha() const { return alpha_; }
    const CostClass& cost_class() const { return cost_class_; }
    std::size_t n_states() const { return dynamics_.n_states(); }
    std::size_t n_actions() const { return dynamics_.n_actions(); }
    std::size_t n_pairs() const { return dynamics_.n_pairs(); }
    double gamma() const { return dynamics_.gamma(); }

    std::size_t sample_expert_pair(Rng& rng) const { return expert_sampler_.sample(rng); }

    RlfdProblem with_alpha(double alpha) const {
        RlfdProblem copy = *this;
        if (!(alpha >= 0.0)) throw InvalidArgument("RlfdProblem: alpha must be non-negative");
        copy.alpha_ = alpha;
        return copy;
    }

private:
    TransitionOracle dynamics_;
    Vector expert_mu_;
    Vector c_hat_;
    double alpha_;
    CostClass cost_class_;
    AliasTable expert_sampler_;
};

/// Primal-dual iterate ((c, u), mu). In hull mode `w` holds the simplex
/// weights and c = C w.
struct SaddleIterate {
    Vector c;
    Vector u;
    Vector mu;
    std::optional<Vector> w;
};

inline SaddleIterate default_iterate(const RlfdProblem& problem) {
    const auto n = static_cast<Eigen::Index>(problem.n_pairs());
    SaddleIterate it;
    if (problem.cost_class().is_hull()) {
        const Matrix& basis = *problem.cost_class().hull;
        it.w = Vector::Constant(basis.cols(), 1.0 / static_cast<double>(basis.cols()));
        it.c = basis * *it.w;
    } else {
        it.c = problem.c_hat();
    }
    it.u = Vector::Zero(static_cast<Eigen::Index>(problem.n_states()));
    it.mu = Vector::Constant(n, 1.0 / static_cast<double>(n));
    return it;
}

namespace detail {

inline Vector dirichlet_ones(Eigen::Index n, Rng& rng) {
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.exponential();
    return x / x.sum();
}

}  // namespace detail

/// Random start: (c, u) uniform in the box (w ~ Dirichlet(1) in hull mode), mu ~ Dirichlet(1).
inline SaddleIterate random_iterate(const RlfdProblem& problem, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(problem.n_pairs());
    SaddleIterate it;
    if (problem.cost_class().is_hull()) {
        const Matrix& basis = *problem.cost_class().hull;
        it.w = detail::dirichlet_ones(basis.cols(), rng);
        it.c = basis * *it.w;
    } else {
        it.c.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) it.c(i) = rng.uniform(-1.0, 1.0);
    }
    it.u.resize(static_cast<Eigen::Index>(problem.n_states()));
    for (Eigen::Index i = 0; i < it.u.size(); ++i) it.u(i) = rng.uniform(-1.0, 1.0);
    it.mu = detail::dirichlet_ones(n, rng);
    return it;
}

/// Lagrangian alpha ||c - c_hat||^2 + <mu_E - mu, c - T^T u>, exact dynamics only.
inline double lagrangian(const RlfdProblem& problem, const SaddleIterate& it) {
    const Mdp& mdp = problem.dynamics().exact("lagrangian");
    const Vector slack = it.c - apply_T_gamma_transpose(mdp, it.u);
    return problem.alpha() * (it.c - problem.c_hat()).squaredNorm() +
           (problem.expert_mu() - it.mu).dot(slack);
}

enum class EstimatorMode {
    SampledCU,  // regularization block sampled on a uniform coordinate
    ExactCU,    // regularization block 2 alpha (c - c_hat) + mu_E - mu computed exactly
};

/// Moment bounds on the estimators for a problem.
struct EstimatorBounds {
    double v_cu = 0.0;  // second moment of the (c, u) estimator
    double z_mu = 0.0;  // sup-norm of the mu estimator
    double v_mu = 0.0;  // local-norm second moment of the mu estimator
};

inline EstimatorBounds estimator_bounds(double alpha, double gamma, std::size_t n_pairs) {
    const double n = static_cast<double>(n_pairs);
    const double td = 4.0 * (1.0 + gamma * gamma) / ((1.0 - gamma) * (1.0 - gamma));
    return {64.0 * alpha * alpha * n + td + 8.0, 2.0 * n / (1.0 - gamma), n * (2.0 + td)};
}

inline EstimatorBounds estimator_bounds(const RlfdProblem& problem) {
    return estimator_bounds(problem.alpha(), problem.gamma(), problem.n_pairs());
}

/// Random indices behind one (c, u) estimate. `uniform_pair` is only drawn in SampledCU mode.
struct CuDraw {
    std::optional<std::size_t> uniform_pair;
    std::size_t pair_t = 0;
    std::size_t next_t = 0;
    std::size_t pair_e = 0;
    std::size_t next_e = 0;
};

/// Random indices behind one mu estimate.
struct MuDraw {
    std::size_t pair = 0;
    std::size_t next = 0;
};

inline void validate_distribution(const Vector& mu, const char* who) {
    if ((mu.array() < 0.0).any() || !mu.allFinite() || std::abs(mu.sum() - 1.0) > 1e-9) {
        throw InvalidArgument(std::string(who) + ": mu is not a distribution");
    }
}

/// Draw order: uniform pair (SampledCU only), (s_t, a_t) ~ mu, s'_t, (s_E, a_E) ~ mu_E, s'_E.
inline CuDraw draw_cu(const RlfdProblem& problem, const Vector& mu, EstimatorMode mode, Rng& rng) {
    CuDraw d;
    if (mode == EstimatorMode::SampledCU) d.uniform_pair = rng.index(problem.n_pairs());
    d.pair_t = sample_categorical(std::span<const double>(mu.data(), static_cast<std::size_t>(mu.size())), rng);
    d.next_t = problem.dynamics().sample_next(d.pair_t, rng);
    d.pair_e = problem.sample_expert_pair(rng);
    d.next_e = problem.dynamics().sample_next(d.pair_e, rng);
    return d;
}

inline MuDraw draw_mu(const RlfdProblem& problem, Rng& rng) {
    MuDraw d;
    d.pair = rng.index(problem.n_pairs());
    d.next = problem.dynamics().sample_next(d.pair, rng);
    return d;
}

/// Gradient estimate for the (c, u) block. `c` is the cost block; in hull mode
/// the caller pulls it back through C^T.
struct CuGradient {
    Vector c;
    Vector u;
};

inline CuGradient cu_gradient_from_draw(const RlfdProblem& problem, const SaddleIterate& it,
                                        const CuDraw& d) {
    const std::size_t n_a = problem.n_actions();
    const double n = static_cast<double>(problem.n_pairs());
    const double alpha = problem.alpha();
    CuGradient g;
    if (d.uniform_pair) {
        const auto k = static_cast<Eigen::Index>(*d.uniform_pair);
        g.c = Vector::Zero(static_cast<Eigen::Index>(problem.n_pairs()));
        g.c(k) = n * 2.0 * alpha * (it.c(k) - problem.c_hat()(k));
        g.c(static_cast<Eigen::Index>(d.pair_e)) += 1.0;
        g.c(static_cast<Eigen::Index>(d.pair_t)) -= 1.0;
    } else {
        g.c = 2.0 * alpha * (it.c - problem.c_hat()) + problem.expert_mu() - it.mu;
    }
    const double scale = 1.0 / (1.0 - problem.gamma());
    const double gamma = problem.gamma();
    g.u = Vector::Zero(static_cast<Eigen::Index>(problem.n_states()));
    g.u(static_cast<Eigen::Index>(d.pair_t / n_a)) += scale;
    g.u(static_cast<Eigen::Index>(d.next_t)) -= scale * gamma;
    g.u(static_cast<Eigen::Index>(d.pair_e / n_a)) -= scale;
    g.u(static_cast<Eigen::Index>(d.next_e)) += scale * gamma;
    return g;
}

/// Value of the single nonzero coordinate of the mu estimate:
/// |S||A| (c(s,a) - (u(s) - gamma u(s')) / (1 - gamma)).
inline double mu_gradient_value(const RlfdProblem& problem, const Vector& c, const Vector& u,
                                const MuDraw& d) {
    const std::size_t s = d.pair / problem.n_actions();
    const double gamma = problem.gamma();
    const double td = (u(static_cast<Eigen::Index>(s)) - gamma * u(static_cast<Eigen::Index>(d.next))) /
                      (1.0 - gamma);
    return static_cast<double>(problem.n_pairs()) * (c(static_cast<Eigen::Index>(d.pair)) - td);
}

/// Stochastic estimate of grad_{(c,u)} L at the iterate.
inline CuGradient grad_cu_estimate(const RlfdProblem& problem, const SaddleIterate& it,
                                   EstimatorMode mode, Rng& rng) {
    validate_distribution(it.mu, "grad_cu_estimate");
    return cu_gradient_from_draw(problem, it, draw_cu(problem, it.mu, mode, rng));
}

/// Stochastic estimate of c - T^T u (the negated mu-gradient of L).
inline Vector grad_mu_estimate(const RlfdProblem& problem, const SaddleIterate& it, Rng& rng) {
    const MuDraw d = draw_mu(problem, rng);
    Vector g = Vector::Zero(static_cast<Eigen::Index>(problem.n_pairs()));
    g(static_cast<Eigen::Index>(d.pair)) = mu_gradient_value(problem, it.c, it.u, d);
    return g;
}

/// Exact gradients of L, for audits and tests.
struct ExactGradients {
    Vector c;   // 2 alpha (c - c_hat) + mu_E - mu
    Vector u;   // T mu - T mu_E
    Vector mu;  // c - T^T u
};

inline ExactGradients exact_gradients(const RlfdProblem& problem, const SaddleIterate& it) {
    const Mdp& mdp = problem.dynamics().exact("exact_gradients");
    return {2.0 * problem.alpha() * (it.c - problem.c_hat()) + problem.expert_mu() - it.mu,
            apply_T_gamma(mdp, it.mu) - apply_T_gamma(mdp, problem.expert_mu()),
            it.c - apply_T_gamma_transpose(mdp, it.u)};
}

/// Euclidean step followed by projection onto [-1, 1]^n.
inline void mirror_step_box(Vector& x, const Vector& grad, double eta) {
    detail::require_size(static_cast<std::size_t>(grad.size()), static_cast<std::size_t>(x.size()),
                         "mirror_step_box");
    if (!(eta > 0.0)) throw InvalidArgument("mirror_step_box: eta must be positive");
    x = (x - eta * grad).cwiseMax(-1.0).cwiseMin(1.0);
}

/// Entries never drop below this after a simplex step.
inline constexpr double kSimplexFloor = 1e-300;

/// Entropic step mu o exp(-eta g) followed by normalization, in the log domain.
inline void mirror_step_simplex(Vector& mu, const Vector& grad, double eta) {
    detail::require_size(static_cast<std::size_t>(grad.size()), static_cast<std::size_t>(mu.size()),
                         "mirror_step_simplex");
    if (!(eta > 0.0)) throw InvalidArgument("mirror_step_simplex: eta must be positive");
    if ((mu.array() <= 0.0).any()) throw InvalidArgument("mirror_step_simplex: mu must be strictly positive");
    Vector logits = mu.array().log().matrix() - eta * grad;
    logits.array() -= logits.maxCoeff();
    Vector next = logits.array().exp().matrix();
    const double total = next.sum();
    if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("mirror_step_simplex: mass collapsed");
    next /= total;
    next = next.cwiseMax(kSimplexFloor);
    mu = next / next.sum();
}

/// Same update when the gradient is nonzero only at `index`. O(n) without transcendental
/// calls on the untouched coordinates.
inline void mirror_step_simplex_single(Vector& mu, Eigen::Index index, double grad_value, double eta) {
    // Summed directly: mu.sum() - mu(index) cancels badly once mu(index) is near 1.
    double rest = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        if (i != index) rest += mu(i);
    }
    const double log_k = std::log(mu(index)) - eta * grad_value;
    const double log_rest = rest > 0.0 ? std::log(rest) : -std::numeric_limits<double>::infinity();
    const double top = std::max(log_k, log_rest);
    const double scale_rest = std::exp(-top);  // multiplier for untouched coordinates
    const double new_k = std::exp(log_k - top);
    const double total = new_k + (rest > 0.0 ? std::exp(log_rest - top) : 0.0);
    if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("mirror_step_simplex: mass collapsed");
    const double f = scale_rest / total;
    mu *= f;
    mu(index) = new_k / total;
    bool floored = false;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        if (mu(i) < kSimplexFloor) {
            mu(i) = kSimplexFloor;
            floored = true;
        }
    }
    if (floored) mu /= mu.sum();
}

}  // namespace rlfd
