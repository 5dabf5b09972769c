#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rlfd/error.hpp"

namespace rlfd {

/// Random stream used by every stochastic routine.
///
/// Engine and conversions are fully specified (mt19937_64, 53-bit mantissa
/// draws), so a seed gives the same sequence on every conforming platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

    /// Independent stream for run `index` of an experiment seeded with `base_seed`.
    static Rng for_run(std::uint64_t base_seed, std::uint64_t index) { return Rng(base_seed + index); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform on {0, ..., n - 1}; n must be positive.
    std::size_t index(std::size_t n) {
        // Lemire's multiply-shift with rejection; unbiased for every n.
        const std::uint64_t range = n;
        std::uint64_t x = engine_();
        __uint128_t m = static_cast<__uint128_t>(x) * range;
        auto low = static_cast<std::uint64_t>(m);
        if (low < range) {
            const std::uint64_t threshold = (0 - range) % range;
            while (low < threshold) {
                x = engine_();
                m = static_cast<__uint128_t>(x) * range;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::size_t>(m >> 64);
    }

    /// Standard exponential, used for Dirichlet(1) draws.
    double exponential() { return -std::log1p(-uniform()); }

    std::uint64_t next() { return engine_(); }

private:
    // splitmix64 finalizer: adjacent seeds map to unrelated engine states.
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
};

/// Walker/Vose alias table: O(1) draws from a fixed categorical distribution.
class AliasTable {
public:
    AliasTable() = default;

    explicit AliasTable(std::span<const double> weights) {
        const std::size_t n = weights.size();
        if (n == 0) throw InvalidArgument("AliasTable: empty distribution");
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw InvalidArgument("AliasTable: negative or NaN weight");
            total += w;
        }
        if (!(total > 0.0)) throw InvalidArgument("AliasTable: zero total mass");

        prob_.assign(n, 0.0);
        alias_.assign(n, 0);
        std::vector<double> scaled(n);
        std::vector<std::size_t> small, large;
        for (std::size_t i = 0; i < n; ++i) {
            scaled[i] = weights[i] * static_cast<double>(n) / total;
            (scaled[i] < 1.0 ? small : large).push_back(i);
        }
        while (!small.empty() && !large.empty()) {
            const std::size_t s = small.back();
            small.pop_back();
            const std::size_t l = large.back();
            prob_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        for (std::size_t i : large) prob_[i] = 1.0;
        // Leftovers in `small` are rounding casualties; they carry full mass.
        for (std::size_t i : small) prob_[i] = 1.0;
        // Zero-weight outcomes must never be drawn, even through rounding.
        std::size_t first_positive = 0;
        while (weights[first_positive] == 0.0) ++first_positive;
        for (std::size_t i = 0; i < n; ++i) {
            if (weights[i] == 0.0) {
                prob_[i] = 0.0;
                if (weights[alias_[i]] == 0.0) alias_[i] = first_positive;
            }
        }
    }

    std::size_t size() const { return prob_.size(); }

    std::size_t sample(Rng& rng) const {
        const std::size_t column = rng.index(prob_.size());
        return rng.uniform() < prob_[column] ? column : alias_[column];
    }

private:
    std::vector<double> prob_;
    std::vector<std::size_t> alias_;
};

/// Inverse-CDF draw from a distribution that changes between calls.
/// The last index with positive weight absorbs rounding in the cumulative sum.
inline std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
    const double target = rng.uniform();
    double cumulative = 0.0;
    std::size_t last_positive = probs.size();
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > 0.0) {
            cumulative += probs[i];
            last_positive = i;
            if (target < cumulative) return i;
        }
    }
    if (last_positive == probs.size()) throw InvalidArgument("sample_categorical: no positive mass");
    return last_positive;
}

}  // namespace rlfd
