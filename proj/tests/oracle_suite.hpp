#pragma once

// One seeded random dataset checked against the brute-force oracles:
// statistics must match exactly (to rounding), asymptotic or exact p-values
// are compared with Monte Carlo permutation p-values.

#include "catspace/stats.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

struct SuiteCase {
    std::size_t n = 0;
    double kw_stat_err = 0.0, kw_p_err = 0.0;
    double mwu_stat_err = 0.0, mwu_p_err = 0.0;
    double tau_stat_err = 0.0, tau_p_err = 0.0;
    double cliffs_err = 0.0;
};

// Values on a half-unit grid so ties are common.
inline std::vector<double> tied_sample(std::mt19937_64& rng, std::size_t n, double shift)
{
    std::normal_distribution<double> normal(shift, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = std::round(normal(rng) * 2.0) / 2.0;
    return v;
}

inline SuiteCase run_suite_case(std::uint64_t seed, std::size_t draws)
{
    namespace st = catspace::stats;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> total(20, 60);
    std::uniform_real_distribution<double> shift(0.0, 0.8);
    SuiteCase out;
    out.n = total(rng);

    // Kruskal-Wallis: 2 or 3 groups of at least 8.
    const std::size_t k = out.n >= 30 ? 3 : 2;
    std::vector<std::vector<double>> groups;
    std::size_t left = out.n;
    for (std::size_t g = 0; g < k; ++g) {
        const std::size_t size = g + 1 == k ? left : out.n / k;
        groups.push_back(tied_sample(rng, size, g * shift(rng)));
        left -= size;
    }
    std::vector<double> pooled;
    std::vector<std::size_t> sizes;
    for (const auto& g : groups) {
        pooled.insert(pooled.end(), g.begin(), g.end());
        sizes.push_back(g.size());
    }
    const auto kw = st::kruskal_wallis(groups);
    out.kw_stat_err = std::abs(kw.statistic - kw_h(groups));
    // Permuting labels permutes the pooled ranks; H is increasing in sum R_g^2 / n_g.
    const auto kw_stat = [&](const std::vector<double>& r) {
        double s = 0.0;
        std::size_t at = 0;
        for (auto sz : sizes) {
            double sum = 0.0;
            for (std::size_t i = 0; i < sz; ++i) sum += r[at + i];
            at += sz;
            s += sum * sum / static_cast<double>(sz);
        }
        return s;
    };
    out.kw_p_err = std::abs(kw.p_value - permutation_p(naive_ranks(pooled), kw_stat, draws, seed * 31 + 1));

    // Mann-Whitney on two samples splitting n.
    const std::size_t na = out.n / 2;
    auto a = tied_sample(rng, na, 0.0);
    auto b = tied_sample(rng, out.n - na, shift(rng));
    const auto mwu = st::mann_whitney_u(a, b);
    out.mwu_stat_err = std::abs(mwu.statistic - mwu_u(a, b));
    std::vector<double> ab(a);
    ab.insert(ab.end(), b.begin(), b.end());
    const double centre = static_cast<double>(na) * static_cast<double>(out.n + 1) / 2.0;
    const auto mwu_stat = [&](const std::vector<double>& r) {
        double sum = 0.0;
        for (std::size_t i = 0; i < na; ++i) sum += r[i];
        return std::abs(sum - centre);
    };
    out.mwu_p_err = std::abs(mwu.p_value - permutation_p(naive_ranks(ab), mwu_stat, draws, seed * 31 + 2));
    out.cliffs_err = std::abs(st::cliffs_delta(a, b) - cliffs(a, b));

    // Kendall tau-b on a noisy monotone pair.
    auto x = tied_sample(rng, out.n, 0.0);
    std::vector<double> y(out.n);
    {
        std::normal_distribution<double> noise(0.0, 1.0);
        const double slope = shift(rng) * 0.5;
        for (std::size_t i = 0; i < out.n; ++i) y[i] = std::round((slope * x[i] + noise(rng)) * 2.0) / 2.0;
    }
    const auto tau = st::kendall_tau_b(x, y);
    out.tau_stat_err = std::abs(tau.statistic - tau_b(x, y));
    // The tau-b denominator is fixed under permutations of y, so |S| orders the draws.
    std::vector<signed char> sx(out.n * out.n);
    for (std::size_t i = 0; i < out.n; ++i)
        for (std::size_t j = 0; j < i; ++j) sx[i * out.n + j] = static_cast<signed char>((x[i] > x[j]) - (x[i] < x[j]));
    const auto tau_stat = [&](const std::vector<double>& yy) {
        long s = 0;
        for (std::size_t i = 0; i < out.n; ++i)
            for (std::size_t j = 0; j < i; ++j) s += sx[i * out.n + j] * ((yy[i] > yy[j]) - (yy[i] < yy[j]));
        return std::abs(static_cast<double>(s));
    };
    out.tau_p_err = std::abs(tau.p_value - permutation_p(y, tau_stat, draws, seed * 31 + 3));
    return out;
}

}  // namespace oracle
