#pragma once

// Finite discounted MDPs in the occupancy-measure LP picture.
//
// Vectors on S x A are flattened row-major: index(s, a) = s * n_actions + a.
// Everything uses the (1 - gamma) normalization, so values and occupancy
// measures live on the same scale as the cost.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "rlfd/error.hpp"

namespace rlfd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Discounted visitation distribution on S x A.
struct OccupancyMeasure {
    Vector mu;
};

/// Normalized value function on S.
struct ValueFunction {
    Vector v;
};

/// Stationary Markov policy; row s is pi(. | s).
struct Policy {
    Matrix probs;

    std::size_t n_states() const { return static_cast<std::size_t>(probs.rows()); }
    std::size_t n_actions() const { return static_cast<std::size_t>(probs.cols()); }

    static Policy uniform(std::size_t n_states, std::size_t n_actions) {
        return Policy{Matrix::Constant(static_cast<Eigen::Index>(n_states),
                                       static_cast<Eigen::Index>(n_actions),
                                       1.0 / static_cast<double>(n_actions))};
    }

    static Policy deterministic(const std::vector<std::size_t>& actions, std::size_t n_actions) {
        Policy pi{Matrix::Zero(static_cast<Eigen::Index>(actions.size()),
                               static_cast<Eigen::Index>(n_actions))};
        for (std::size_t s = 0; s < actions.size(); ++s) {
            if (actions[s] >= n_actions) throw InvalidArgument("deterministic policy: action out of range");
            pi.probs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(actions[s])) = 1.0;
        }
        return pi;
    }

    /// Most likely action per state (lowest index on ties).
    std::vector<std::size_t> argmax() const {
        std::vector<std::size_t> out(n_states());
        for (Eigen::Index s = 0; s < probs.rows(); ++s) {
            Eigen::Index best = 0;
            probs.row(s).maxCoeff(&best);
            out[static_cast<std::size_t>(s)] = static_cast<std::size_t>(best);
        }
        return out;
    }
};

/// Finite MDP (S, A, P, nu0, c, gamma). Immutable once validated.
class Mdp {
public:
    Mdp(std::size_t n_states, std::size_t n_actions, Matrix transition, Vector nu0, Vector cost,
        double gamma)
        : n_states_(n_states),
          n_actions_(n_actions),
          transition_(std::move(transition)),
          nu0_(std::move(nu0)),
          cost_(std::move(cost)),
          gamma_(gamma) {
        validate();
    }

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    std::size_t n_pairs() const { return n_states_ * n_actions_; }
    double gamma() const { return gamma_; }

    /// Row (s, a) holds P(. | s, a); shape n_pairs x n_states.
    const Matrix& transition() const { return transition_; }
    const Vector& nu0() const { return nu0_; }
    const Vector& cost() const { return cost_; }

    std::size_t index(std::size_t s, std::size_t a) const { return s * n_actions_ + a; }

    /// Same dynamics, different cost vector.
    Mdp with_cost(Vector cost) const {
        return Mdp(n_states_, n_actions_, transition_, nu0_, std::move(cost), gamma_);
    }

    bool operator==(const Mdp& other) const {
        return n_states_ == other.n_states_ && n_actions_ == other.n_actions_ &&
               gamma_ == other.gamma_ && nu0_ == other.nu0_ && cost_ == other.cost_ &&
               transition_ == other.transition_;
    }

private:
    void validate() const {
        if (n_states_ == 0 || n_actions_ == 0) throw InvalidArgument("Mdp: empty state or action space");
        if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw InvalidArgument("Mdp: gamma must lie in (0, 1)");
        const auto n_sa = static_cast<Eigen::Index>(n_pairs());
        const auto n_s = static_cast<Eigen::Index>(n_states_);
        if (transition_.rows() != n_sa || transition_.cols() != n_s) {
            throw DimensionError("Mdp: transition must be (|S||A|) x |S|");
        }
        detail::require_size(static_cast<std::size_t>(nu0_.size()), n_states_, "Mdp nu0");
        detail::require_size(static_cast<std::size_t>(cost_.size()), n_pairs(), "Mdp cost");
        for (Eigen::Index r = 0; r < n_sa; ++r) {
            if ((transition_.row(r).array() < 0.0).any() || !transition_.row(r).allFinite()) {
                throw InvalidArgument("Mdp: transition row " + std::to_string(r) + " has a negative entry");
            }
            if (std::abs(transition_.row(r).sum() - 1.0) > 1e-12) {
                throw InvalidArgument("Mdp: transition row " + std::to_string(r) + " does not sum to 1");
            }
        }
        if (std::abs(nu0_.sum() - 1.0) > 1e-12) throw InvalidArgument("Mdp: nu0 does not sum to 1");
        if ((nu0_.array() <= 0.0).any()) throw InvalidArgument("Mdp: nu0 must be strictly positive");
        if (!cost_.allFinite() || cost_.lpNorm<Eigen::Infinity>() > 1.0) {
            throw InvalidArgument("Mdp: cost must lie in [-1, 1]");
        }
    }

    std::size_t n_states_;
    std::size_t n_actions_;
    Matrix transition_;
    Vector nu0_;
    Vector cost_;
    double gamma_;
};

inline void validate_policy(const Mdp& mdp, const Policy& pi) {
    if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions()) {
        throw DimensionError("policy shape does not match the MDP");
    }
    for (Eigen::Index s = 0; s < pi.probs.rows(); ++s) {
        if ((pi.probs.row(s).array() < 0.0).any() || std::abs(pi.probs.row(s).sum() - 1.0) > 1e-12) {
            throw InvalidArgument("policy row " + std::to_string(s) + " is not a distribution");
        }
    }
}

/// T_gamma mu = (B mu - gamma P mu) / (1 - gamma), a vector on S.
inline Vector apply_T_gamma(const Mdp& mdp, const Vector& mu) {
    detail::require_size(static_cast<std::size_t>(mu.size()), mdp.n_pairs(), "apply_T_gamma");
    const std::size_t n_a = mdp.n_actions();
    Vector out = -mdp.gamma() * (mdp.transition().transpose() * mu);
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        out(static_cast<Eigen::Index>(s)) +=
            mu.segment(static_cast<Eigen::Index>(s * n_a), static_cast<Eigen::Index>(n_a)).sum();
    }
    return out / (1.0 - mdp.gamma());
}

/// (T_gamma^T u)(s, a) = (u(s) - gamma sum_s' P(s'|s,a) u(s')) / (1 - gamma).
inline Vector apply_T_gamma_transpose(const Mdp& mdp, const Vector& u) {
    detail::require_size(static_cast<std::size_t>(u.size()), mdp.n_states(), "apply_T_gamma_transpose");
    const std::size_t n_a = mdp.n_actions();
    Vector out = -mdp.gamma() * (mdp.transition() * u);
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        for (std::size_t a = 0; a < n_a; ++a) out(static_cast<Eigen::Index>(s * n_a + a)) += u(static_cast<Eigen::Index>(s));
    }
    return out / (1.0 - mdp.gamma());
}

namespace detail {

/// P_pi as an |S| x |S| matrix: P_pi(s, s') = sum_a pi(a|s) P(s'|s,a).
inline Matrix policy_transition(const Mdp& mdp, const Policy& pi) {
    const auto n_s = static_cast<Eigen::Index>(mdp.n_states());
    const auto n_a = static_cast<Eigen::Index>(mdp.n_actions());
    Matrix p_pi = Matrix::Zero(n_s, n_s);
    for (Eigen::Index s = 0; s < n_s; ++s) {
        for (Eigen::Index a = 0; a < n_a; ++a) {
            const double w = pi.probs(s, a);
            if (w != 0.0) p_pi.row(s) += w * mdp.transition().row(s * n_a + a);
        }
    }
    return p_pi;
}

inline Vector solve_checked(const Matrix& lhs, const Vector& rhs, const char* what) {
    Eigen::PartialPivLU<Matrix> lu(lhs);
    Vector x = lu.solve(rhs);
    if (!x.allFinite() || !(lhs * x).isApprox(rhs, 1e-9)) {
        throw NumericalError(std::string(what) + ": singular linear system");
    }
    return x;
}

}  // namespace detail

/// Occupancy measure of a policy: mu(s,a) = pi(a|s) d(s) with d = (1-g) nu0 + g P_pi^T d.
inline OccupancyMeasure occupancy_from_policy(const Mdp& mdp, const Policy& pi) {
    validate_policy(mdp, pi);
    const auto n_s = static_cast<Eigen::Index>(mdp.n_states());
    const auto n_a = static_cast<Eigen::Index>(mdp.n_actions());
    const double g = mdp.gamma();
    Matrix lhs = Matrix::Identity(n_s, n_s) - g * detail::policy_transition(mdp, pi).transpose();
    Vector d = detail::solve_checked(lhs, (1.0 - g) * mdp.nu0(), "occupancy_from_policy");
    Vector mu(n_s * n_a);
    for (Eigen::Index s = 0; s < n_s; ++s) {
        for (Eigen::Index a = 0; a < n_a; ++a) mu(s * n_a + a) = pi.probs(s, a) * d(s);
    }
    return {mu};
}

/// pi(a|s) = mu(s,a) / sum_a' mu(s,a'); states without mass get the uniform distribution.
inline Policy policy_from_occupancy(const Vector& mu, std::size_t n_states, std::size_t n_actions) {
    detail::require_size(static_cast<std::size_t>(mu.size()), n_states * n_actions, "policy_from_occupancy");
    if ((mu.array() < 0.0).any()) throw InvalidArgument("policy_from_occupancy: negative entry");
    Policy pi = Policy::uniform(n_states, n_actions);
    const auto n_a = static_cast<Eigen::Index>(n_actions);
    for (Eigen::Index s = 0; s < static_cast<Eigen::Index>(n_states); ++s) {
        const auto seg = mu.segment(s * n_a, n_a);
        const double mass = seg.sum();
        if (mass > 0.0) pi.probs.row(s) = seg.transpose() / mass;
    }
    return pi;
}

inline Policy policy_from_occupancy(const Mdp& mdp, const OccupancyMeasure& occ) {
    return policy_from_occupancy(occ.mu, mdp.n_states(), mdp.n_actions());
}

struct Evaluation {
    ValueFunction value;
    double rho = 0.0;
};

/// Exact evaluation: V = (1-g) c_pi + g P_pi V, rho = <nu0, V>.
inline Evaluation policy_evaluation(const Mdp& mdp, const Policy& pi, const Vector& cost) {
    validate_policy(mdp, pi);
    detail::require_size(static_cast<std::size_t>(cost.size()), mdp.n_pairs(), "policy_evaluation cost");
    const auto n_s = static_cast<Eigen::Index>(mdp.n_states());
    const auto n_a = static_cast<Eigen::Index>(mdp.n_actions());
    const double g = mdp.gamma();
    Vector c_pi(n_s);
    for (Eigen::Index s = 0; s < n_s; ++s) c_pi(s) = pi.probs.row(s).dot(cost.segment(s * n_a, n_a));
    Matrix lhs = Matrix::Identity(n_s, n_s) - g * detail::policy_transition(mdp, pi);
    Vector v = detail::solve_checked(lhs, (1.0 - g) * c_pi, "policy_evaluation");
    return {{v}, mdp.nu0().dot(v)};
}

inline Evaluation policy_evaluation(const Mdp& mdp, const Policy& pi) {
    return policy_evaluation(mdp, pi, mdp.cost());
}

/// Normalized Q-values (1-g) c(s,a) + g sum_s' P(s'|s,a) V(s').
inline Vector q_values(const Mdp& mdp, const Vector& cost, const Vector& v) {
    return (1.0 - mdp.gamma()) * cost + mdp.gamma() * (mdp.transition() * v);
}

/// Greedy deterministic policy for V; ties go to the lowest action index.
inline Policy greedy_policy(const Mdp& mdp, const Vector& cost, const Vector& v) {
    const Vector q = q_values(mdp, cost, v);
    const std::size_t n_a = mdp.n_actions();
    std::vector<std::size_t> actions(mdp.n_states());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        std::size_t best = 0;
        double best_q = q(static_cast<Eigen::Index>(s * n_a));
        for (std::size_t a = 1; a < n_a; ++a) {
            const double qa = q(static_cast<Eigen::Index>(s * n_a + a));
            if (qa < best_q) {
                best_q = qa;
                best = a;
            }
        }
        actions[s] = best;
    }
    return Policy::deterministic(actions, n_a);
}

/// One application of the normalized Bellman optimality operator.
inline Vector bellman_backup(const Mdp& mdp, const Vector& cost, const Vector& v) {
    const Vector q = q_values(mdp, cost, v);
    const auto n_a = static_cast<Eigen::Index>(mdp.n_actions());
    Vector out(static_cast<Eigen::Index>(mdp.n_states()));
    for (Eigen::Index s = 0; s < out.size(); ++s) out(s) = q.segment(s * n_a, n_a).minCoeff();
    return out;
}

struct ForwardSolution {
    Policy policy;
    OccupancyMeasure occupancy;
    ValueFunction value;
    double rho = 0.0;
    std::size_t sweeps = 0;
};

/// Value iteration to tolerance, then greedy policy, exact occupancy and exact evaluation.
/// The returned rho is within tol of the optimal cost.
inline ForwardSolution solve_forward_optimal(const Mdp& mdp, const Vector& cost, double tol = 1e-9) {
    if (!(tol > 0.0)) throw InvalidArgument("solve_forward_optimal: tol must be positive");
    detail::require_size(static_cast<std::size_t>(cost.size()), mdp.n_pairs(), "solve_forward_optimal cost");
    const double g = mdp.gamma();
    const double stop = tol * (1.0 - g) / (2.0 * g);
    Vector v = Vector::Zero(static_cast<Eigen::Index>(mdp.n_states()));
    std::size_t sweeps = 0;
    while (true) {
        Vector next = bellman_backup(mdp, cost, v);
        ++sweeps;
        const double change = (next - v).lpNorm<Eigen::Infinity>();
        v = std::move(next);
        if (change < stop) break;
    }
    ForwardSolution sol;
    sol.policy = greedy_policy(mdp, cost, v);
    sol.occupancy = occupancy_from_policy(mdp, sol.policy);
    auto eval = policy_evaluation(mdp, sol.policy, cost);
    sol.value = eval.value;
    sol.rho = eval.rho;
    sol.sweeps = sweeps;
    return sol;
}

inline ForwardSolution solve_forward_optimal(const Mdp& mdp, double tol = 1e-9) {
    return solve_forward_optimal(mdp, mdp.cost(), tol);
}

struct FeasibilityReport {
    double flow_residual = 0.0;  // ||T_gamma mu - nu0||_inf
    double min_entry = 0.0;
    double sum = 0.0;
    bool pass = false;
};

inline FeasibilityReport check_feasibility(const Mdp& mdp, const Vector& mu, double tol = 1e-9) {
    FeasibilityReport r;
    r.flow_residual = (apply_T_gamma(mdp, mu) - mdp.nu0()).lpNorm<Eigen::Infinity>();
    r.min_entry = mu.minCoeff();
    r.sum = mu.sum();
    r.pass = r.flow_residual <= tol && r.min_entry >= -tol;
    return r;
}

inline FeasibilityReport check_feasibility(const Mdp& mdp, const OccupancyMeasure& occ, double tol = 1e-9) {
    return check_feasibility(mdp, occ.mu, tol);
}

/// Complementary-slackness certificate: c - T^T u >= -tol and |<mu, c - T^T u>| <= tol.
inline bool certify_optimality(const Mdp& mdp, const Vector& mu, const Vector& cost, const Vector& u,
                               double tol = 1e-6) {
    detail::require_size(static_cast<std::size_t>(cost.size()), mdp.n_pairs(), "certify_optimality cost");
    const Vector slack = cost - apply_T_gamma_transpose(mdp, u);
    if (slack.minCoeff() < -tol) return false;
    return std::abs(mu.dot(slack)) <= tol;
}

inline bool certify_optimality(const Mdp& mdp, const OccupancyMeasure& occ, const Vector& cost,
                               const ValueFunction& u, double tol = 1e-6) {
    return certify_optimality(mdp, occ.mu, cost, u.v, tol);
}

}  // namespace rlfd
