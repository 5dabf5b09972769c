#pragma once

#include <algorithm>
#include <cmath>

#include "rlfd/problem.hpp"

namespace rlfd {

/// Empirical moments of both gradient estimators at one iterate, compared with
/// the exact gradients and with the bounds in `EstimatorBounds`.
struct AuditReport {
    std::size_t n_samples = 0;
    EstimatorBounds bounds;

    double cu_mean_error = 0.0;      // max_i |mean_i - exact_i| over the (c, u) block
    double cu_mean_tolerance = 0.0;  // 5 sqrt(v_cu / M)
    double cu_second_moment = 0.0;   // mean of ||g_cu||_2^2
    double cu_max_sq_norm = 0.0;

    double mu_mean_error = 0.0;
    double mu_mean_tolerance = 0.0;  // 5 sqrt(v_mu / M)
    double mu_max_sup = 0.0;         // max over draws of ||g_mu||_inf
    double mu_local_moment = 0.0;    // mean of sum_i mu_i g_i^2

    bool cu_unbiased() const { return cu_mean_error <= cu_mean_tolerance; }
    bool mu_unbiased() const { return mu_mean_error <= mu_mean_tolerance; }
    bool cu_moment_ok() const { return cu_second_moment <= bounds.v_cu; }
    bool mu_sup_ok() const { return mu_max_sup <= bounds.z_mu; }
    bool mu_moment_ok() const { return mu_local_moment <= bounds.v_mu; }
    bool pass() const { return cu_unbiased() && mu_unbiased() && cu_moment_ok() && mu_sup_ok() && mu_moment_ok(); }
};

inline AuditReport estimator_moment_audit(const RlfdProblem& problem, const SaddleIterate& it, std::size_t n_samples,
                                          Rng& rng, EstimatorMode mode = EstimatorMode::SampledCU) {
    if (n_samples < 1) throw InvalidArgument("estimator_moment_audit: n_samples must be >= 1");
    validate_distribution(it.mu, "estimator_moment_audit");
    const ExactGradients exact = exact_gradients(problem, it);
    const auto n = static_cast<Eigen::Index>(problem.n_pairs());
    const auto n_s = static_cast<Eigen::Index>(problem.n_states());
    const std::size_t n_a = problem.n_actions();
    const double gamma = problem.gamma();
    const double scale = 1.0 / (1.0 - gamma);
    const double alpha = problem.alpha();
    const double m = static_cast<double>(n_samples);

    AuditReport rep;
    rep.n_samples = n_samples;
    rep.bounds = estimator_bounds(problem);

    // Sparse accumulation: every draw touches O(1) coordinates except the exact c-block.
    Vector sum_c = Vector::Zero(n), sum_u = Vector::Zero(n_s), sum_mu = Vector::Zero(n);
    const Vector exact_c_block = exact.c;
    double sq_cu = 0.0, local_mu = 0.0;
    double gu[4];
    Eigen::Index iu[4];

    for (std::size_t k = 0; k < n_samples; ++k) {
        const CuDraw d = draw_cu(problem, it.mu, mode, rng);
        double c_sq = 0.0;
        if (d.uniform_pair) {
            // Sparse c-block: n 2 alpha (c_k - c_hat_k) e_k + e_E - e_t.
            const auto j = static_cast<Eigen::Index>(*d.uniform_pair);
            const auto e = static_cast<Eigen::Index>(d.pair_e);
            const auto t = static_cast<Eigen::Index>(d.pair_t);
            const double reg = static_cast<double>(n) * 2.0 * alpha * (it.c(j) - problem.c_hat()(j));
            sum_c(j) += reg;
            sum_c(e) += 1.0;
            sum_c(t) -= 1.0;
            double vj = reg, ve = 1.0, vt = -1.0;
            if (e == j) { vj += ve; ve = 0.0; }
            if (t == j) { vj += vt; vt = 0.0; }
            if (t == e) { ve += vt; vt = 0.0; }
            c_sq = vj * vj + ve * ve + vt * vt;
        } else {
            c_sq = exact_c_block.squaredNorm();
        }
        iu[0] = static_cast<Eigen::Index>(d.pair_t / n_a);
        iu[1] = static_cast<Eigen::Index>(d.next_t);
        iu[2] = static_cast<Eigen::Index>(d.pair_e / n_a);
        iu[3] = static_cast<Eigen::Index>(d.next_e);
        gu[0] = scale;
        gu[1] = -scale * gamma;
        gu[2] = -scale;
        gu[3] = scale * gamma;
        for (int a = 0; a < 4; ++a) {
            for (int b = a + 1; b < 4; ++b) {
                if (iu[b] == iu[a]) {
                    gu[a] += gu[b];
                    gu[b] = 0.0;
                }
            }
        }
        double u_sq = 0.0;
        for (int a = 0; a < 4; ++a) {
            sum_u(iu[a]) += gu[a];
            u_sq += gu[a] * gu[a];
        }
        const double sq = c_sq + u_sq;
        sq_cu += sq;
        rep.cu_max_sq_norm = std::max(rep.cu_max_sq_norm, sq);

        const MuDraw md = draw_mu(problem, rng);
        const double g = mu_gradient_value(problem, it.c, it.u, md);
        const auto p = static_cast<Eigen::Index>(md.pair);
        sum_mu(p) += g;
        rep.mu_max_sup = std::max(rep.mu_max_sup, std::abs(g));
        local_mu += it.mu(p) * g * g;
    }

    const Vector mean_c = mode == EstimatorMode::ExactCU ? exact_c_block : Vector(sum_c / m);
    rep.cu_mean_error = std::max((mean_c - exact.c).lpNorm<Eigen::Infinity>(),
                                 (sum_u / m - exact.u).lpNorm<Eigen::Infinity>());
    rep.cu_second_moment = sq_cu / m;
    rep.cu_mean_tolerance = 5.0 * std::sqrt(rep.bounds.v_cu / m);
    // The mu estimator is unbiased for c - T^T u; its negation is the ascent direction.
    rep.mu_mean_error = (sum_mu / m - exact.mu).lpNorm<Eigen::Infinity>();
    rep.mu_mean_tolerance = 5.0 * std::sqrt(rep.bounds.v_mu / m);
    rep.mu_local_moment = local_mu / m;
    return rep;
}

}  // namespace rlfd
