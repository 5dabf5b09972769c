#pragma once

// Exact duality gap of the saddle problem and the suboptimality report that
// ties an approximate solution back to the inverse problem.
//
// Both inner problems of the gap are separable over the box and linear over
// the simplex, so they are solved in closed form:
//   max_{mu' in simplex} L(c, u, mu') = alpha ||c - c_hat||^2 + <mu_E, r> - min_j r_j,  r = c - T^T u
//   min_{(c', u') in box} L(c', u', mu): c'_i = clip(c_hat_i - d_i / (2 alpha)), u'_j = sign(w_j)
// with d = mu_E - mu and w = T d.

#include <algorithm>
#include <cmath>

#include "rlfd/mdp.hpp"
#include "rlfd/problem.hpp"

namespace rlfd {

struct GapTerms {
    double max_term = 0.0;  // max over mu' of L(c, u, mu')
    double min_term = 0.0;  // min over (c', u') of L(c', u', mu)
    double gap() const { return max_term - min_term; }
};

/// Minimizer of alpha (x - c_hat)^2 + d x over [-1, 1]; ties at alpha = 0, d = 0 keep c_hat.
inline double box_cost_minimizer(double c_hat, double d, double alpha) {
    if (alpha > 0.0) return std::clamp(c_hat - d / (2.0 * alpha), -1.0, 1.0);
    if (d > 0.0) return -1.0;
    if (d < 0.0) return 1.0;
    return std::clamp(c_hat, -1.0, 1.0);
}

inline GapTerms duality_gap_terms(const RlfdProblem& problem, const SaddleIterate& it) {
    const Mdp& mdp = problem.dynamics().exact("duality_gap_exact");
    const double alpha = problem.alpha();
    const Vector& c_hat = problem.c_hat();
    const Vector& mu_e = problem.expert_mu();

    GapTerms terms;
    const Vector r = it.c - apply_T_gamma_transpose(mdp, it.u);
    terms.max_term = alpha * (it.c - c_hat).squaredNorm() + mu_e.dot(r) - r.minCoeff();

    const Vector d = mu_e - it.mu;
    const Vector w = apply_T_gamma(mdp, d);
    double min_c = 0.0;
    if (problem.cost_class().is_hull()) {
        if (alpha != 0.0) throw InvalidArgument("duality_gap_exact: hull cost class needs alpha = 0");
        // Linear in w' over the simplex: attained at a vertex.
        min_c = (problem.cost_class().hull->transpose() * d).minCoeff();
    } else {
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            const double x = box_cost_minimizer(c_hat(i), d(i), alpha);
            min_c += alpha * (x - c_hat(i)) * (x - c_hat(i)) + d(i) * x;
        }
    }
    terms.min_term = min_c - w.lpNorm<1>();
    return terms;
}

/// Gap((c, u), mu) = max_{mu'} L(c, u, mu') - min_{(c', u')} L(c', u', mu) >= 0.
inline double duality_gap_exact(const RlfdProblem& problem, const SaddleIterate& it) {
    return duality_gap_terms(problem, it).gap();
}

/// Reference optimum ((c_A, u_A), mu_A) of the saddle problem; mu_A must be an occupancy measure.
struct ReferenceSolution {
    Vector c;
    Vector u;
    Vector mu;
};

struct OptimalityReport {
    double lhs = 0.0;                // alpha ||c_eps - c_hat||^2 + rho_{c_eps}(pi_E) - rho_{c_eps}(pi_A)
    double rhs = 0.0;                // eps + alpha ||c_A - c_hat||^2 + rho_{c_A}(pi_E) - rho*_{c_A}
    double rho_eps_expert = 0.0;     // rho_{c_eps}(pi_E)
    double rho_eps_induced = 0.0;    // rho_{c_eps}(pi_{mu_eps})
    double rho_eps_optimal = 0.0;    // rho*_{c_eps}
    double distance_sq = 0.0;        // ||c_eps - c_hat||^2
};

/// Compares an averaged iterate against a reference optimum. pi_A is the policy of mu_A.
inline OptimalityReport epsilon_optimality_report(const RlfdProblem& problem, const SaddleIterate& averaged,
                                                  const ReferenceSolution& reference, double epsilon) {
    const Mdp& mdp = problem.dynamics().exact("epsilon_optimality_report");
    if (!check_feasibility(mdp, reference.mu, 1e-8).pass) {
        throw InvalidArgument("epsilon_optimality_report: reference mu is not an occupancy measure");
    }
    const double alpha = problem.alpha();
    const Policy pi_e = policy_from_occupancy(problem.expert_mu(), mdp.n_states(), mdp.n_actions());
    const Policy pi_a = policy_from_occupancy(reference.mu, mdp.n_states(), mdp.n_actions());
    const Policy pi_eps = policy_from_occupancy(averaged.mu, mdp.n_states(), mdp.n_actions());

    OptimalityReport rep;
    rep.distance_sq = (averaged.c - problem.c_hat()).squaredNorm();
    rep.rho_eps_expert = policy_evaluation(mdp, pi_e, averaged.c).rho;
    rep.rho_eps_induced = policy_evaluation(mdp, pi_eps, averaged.c).rho;
    rep.rho_eps_optimal = solve_forward_optimal(mdp, averaged.c, 1e-10).rho;
    rep.lhs = alpha * rep.distance_sq + rep.rho_eps_expert - policy_evaluation(mdp, pi_a, averaged.c).rho;

    const double ref_expert = policy_evaluation(mdp, pi_e, reference.c).rho;
    const double ref_optimal = solve_forward_optimal(mdp, reference.c, 1e-10).rho;
    rep.rhs = epsilon + alpha * (reference.c - problem.c_hat()).squaredNorm() + ref_expert - ref_optimal;
    return rep;
}

}  // namespace rlfd
