#pragma once

#include <random>

#include "rlfd/mdp.hpp"

namespace rlfd::testing_support {

/// Random dense MDP with strictly positive nu0 and costs in [-1, 1].
inline Mdp random_mdp(std::size_t n_s, std::size_t n_a, double gamma, std::mt19937_64& gen,
                      double zero_prob = 0.0) {
    std::uniform_real_distribution<double> u01(0.0, 1.0), upm(-1.0, 1.0);
    Matrix p(static_cast<Eigen::Index>(n_s * n_a), static_cast<Eigen::Index>(n_s));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = u01(gen) < zero_prob ? 0.0 : u01(gen) + 1e-3;
        if (p.row(r).sum() == 0.0) p(r, static_cast<Eigen::Index>(gen() % n_s)) = 1.0;
        p.row(r) /= p.row(r).sum();
    }
    Vector nu0(static_cast<Eigen::Index>(n_s));
    for (Eigen::Index s = 0; s < nu0.size(); ++s) nu0(s) = u01(gen) + 0.05;
    nu0 /= nu0.sum();
    Vector cost(static_cast<Eigen::Index>(n_s * n_a));
    for (Eigen::Index i = 0; i < cost.size(); ++i) cost(i) = upm(gen);
    return Mdp(n_s, n_a, std::move(p), std::move(nu0), std::move(cost), gamma);
}

inline Policy random_policy(std::size_t n_s, std::size_t n_a, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u01(0.01, 1.0);
    Policy pi{Matrix(static_cast<Eigen::Index>(n_s), static_cast<Eigen::Index>(n_a))};
    for (Eigen::Index s = 0; s < pi.probs.rows(); ++s) {
        for (Eigen::Index a = 0; a < pi.probs.cols(); ++a) pi.probs(s, a) = u01(gen);
        pi.probs.row(s) /= pi.probs.row(s).sum();
    }
    return pi;
}

inline Vector random_simplex(std::size_t n, std::mt19937_64& gen) {
    std::exponential_distribution<double> e(1.0);
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = e(gen);
    return v / v.sum();
}

inline Vector random_box(std::size_t n, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> upm(-1.0, 1.0);
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = upm(gen);
    return v;
}

/// Single state, single action, self-loop.
inline Mdp one_state(double gamma, double cost = 0.0) {
    return Mdp(1, 1, Matrix::Ones(1, 1), Vector::Ones(1), Vector::Constant(1, cost), gamma);
}

/// s0 -> s1 -> s1 with one action. nu0 must be positive, so a tiny mass on s1 is allowed via `eps`.
inline Mdp chain(double gamma, double eps, Vector cost) {
    Matrix p(2, 2);
    p << 0.0, 1.0, 0.0, 1.0;
    Vector nu0(2);
    nu0 << 1.0 - eps, eps;
    return Mdp(2, 1, std::move(p), std::move(nu0), std::move(cost), gamma);
}

}  // namespace rlfd::testing_support
