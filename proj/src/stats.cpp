#include "catspace/stats.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace catspace::stats {

std::string_view to_string(Method m)
{
    switch (m) {
        case Method::KruskalWallis: return "kruskal_wallis";
        case Method::MannWhitneyU: return "mann_whitney_u";
        case Method::ChiSquareGof: return "chi_square_gof";
        case Method::KendallTauB: return "kendall_tau_b";
        case Method::JarqueBera: return "jarque_bera";
        case Method::Kolmogorov: return "kolmogorov_smirnov";
        case Method::Lilliefors: return "lilliefors";
        case Method::BartlettSphericity: return "bartlett_sphericity";
    }
    return "unknown";
}

namespace {

double clamp_probability(double p)
{
    if (std::isnan(p)) return 1.0;
    return std::clamp(p, 0.0, 1.0);
}

void require_finite(std::span<const double> x, const char* what)
{
    for (double v : x) {
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite value");
    }
}

// Sizes of runs of equal values in a sorted sample.
std::vector<std::int64_t> tie_groups(std::vector<double> sorted)
{
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::int64_t> groups;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        groups.push_back(static_cast<std::int64_t>(j - i));
        i = j;
    }
    return groups;
}

double tie_correction_sum(std::span<const std::int64_t> groups)
{
    double sum = 0.0;
    for (auto t : groups) {
        const double td = static_cast<double>(t);
        sum += td * td * td - td;
    }
    return sum;
}

}  // namespace

double chi_squared_sf(double x, double df)
{
    if (!(df > 0.0)) throw std::invalid_argument("chi_squared_sf: df must be positive");
    if (!(x > 0.0)) return 1.0;
    if (std::isinf(x)) return 0.0;
    return boost::math::gamma_q(df / 2.0, x / 2.0);
}

double normal_cdf(double z) { return 0.5 * boost::math::erfc(-z / std::numbers::sqrt2); }

double normal_sf(double z) { return 0.5 * boost::math::erfc(z / std::numbers::sqrt2); }

double normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p outside (0,1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double kolmogorov_sf(double lambda)
{
    if (lambda <= 0.0) return 1.0;
    if (lambda < 1.18) {
        // P(K <= l) = sqrt(2 pi)/l * sum exp(-(2k-1)^2 pi^2 / (8 l^2))
        const double pi2 = std::numbers::pi * std::numbers::pi;
        double cdf = 0.0;
        for (int k = 1; k <= 50; ++k) {
            const double odd = 2.0 * k - 1.0;
            const double term = std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
            cdf += term;
            if (term < 1e-17) break;
        }
        cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
        return clamp_probability(1.0 - cdf);
    }
    double sf = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sf += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-17) break;
    }
    return clamp_probability(sf);
}

std::vector<double> midranks(std::span<const double> x)
{
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && x[order[j]] == x[order[i]]) ++j;
        // positions i..j-1 share the rank average of (i+1)..j
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
        i = j;
    }
    return ranks;
}

TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups)
{
    if (groups.size() < 2) throw std::invalid_argument("kruskal_wallis: need at least two groups");
    std::vector<double> pooled;
    for (const auto& g : groups) {
        if (g.empty()) throw std::invalid_argument("kruskal_wallis: empty group");
        require_finite(g, "kruskal_wallis");
        pooled.insert(pooled.end(), g.begin(), g.end());
    }
    const double n = static_cast<double>(pooled.size());
    if (pooled.size() < 3) throw std::invalid_argument("kruskal_wallis: need at least three observations");

    TestResult result;
    result.method = Method::KruskalWallis;
    result.df = static_cast<int>(groups.size()) - 1;

    const auto ties = tie_groups(pooled);
    const double correction = 1.0 - tie_correction_sum(ties) / (n * n * n - n);
    if (correction <= 0.0) {
        result.statistic = 0.0;
        result.p_value = 1.0;
        return result;
    }

    const auto ranks = midranks(pooled);
    double sum_sq = 0.0;
    std::size_t offset = 0;
    for (const auto& g : groups) {
        double rank_sum = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) rank_sum += ranks[offset + i];
        offset += g.size();
        sum_sq += rank_sum * rank_sum / static_cast<double>(g.size());
    }
    const double h = (12.0 / (n * (n + 1.0)) * sum_sq - 3.0 * (n + 1.0)) / correction;
    result.statistic = std::max(h, 0.0);
    result.p_value = chi_squared_sf(result.statistic, *result.df);
    return result;
}

namespace {

// Exact two-sided permutation p for the rank sum of the first `na` of the
// pooled doubled mid-ranks, conditional on the observed tie pattern.
double mwu_exact_p(std::span<const std::int64_t> doubled_ranks, std::size_t na, std::int64_t observed_sum)
{
    const std::size_t n = doubled_ranks.size();
    std::int64_t max_sum = 0;
    {
        std::vector<std::int64_t> sorted(doubled_ranks.begin(), doubled_ranks.end());
        std::sort(sorted.rbegin(), sorted.rend());
        for (std::size_t i = 0; i < na; ++i) max_sum += sorted[i];
    }
    const auto width = static_cast<std::size_t>(max_sum + 1);
    // ways[j][s]: number of j-subsets of the items seen so far with doubled sum s
    std::vector<std::vector<double>> ways(na + 1, std::vector<double>(width, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<std::size_t>(doubled_ranks[i]);
        for (std::size_t j = std::min(na, i + 1); j >= 1; --j) {
            auto& dst = ways[j];
            const auto& src = ways[j - 1];
            for (std::size_t s = width; s-- > r;) dst[s] += src[s - r];
        }
    }
    const double mean = static_cast<double>(na) * static_cast<double>(n + 1);  // doubled
    const double observed_dev = std::abs(static_cast<double>(observed_sum) - mean);
    double total = 0.0;
    double extreme = 0.0;
    for (std::size_t s = 0; s < width; ++s) {
        const double w = ways[na][s];
        if (w == 0.0) continue;
        total += w;
        if (std::abs(static_cast<double>(s) - mean) >= observed_dev - 1e-9) extreme += w;
    }
    return clamp_probability(extreme / total);
}

}  // namespace

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b, MwuMethod method)
{
    if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");
    require_finite(a, "mann_whitney_u");
    require_finite(b, "mann_whitney_u");

    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = midranks(pooled);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double n = na + nb;

    double rank_sum_a = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) rank_sum_a += ranks[i];

    TestResult result;
    result.method = Method::MannWhitneyU;
    result.statistic = rank_sum_a - na * (na + 1.0) / 2.0;

    const bool exact = method == MwuMethod::Exact ||
                       (method == MwuMethod::Auto && a.size() * b.size() <= 400);
    if (exact) {
        std::vector<std::int64_t> doubled(pooled.size());
        for (std::size_t i = 0; i < ranks.size(); ++i) doubled[i] = std::llround(2.0 * ranks[i]);
        // Enumerate over the smaller sample; the two-sided p is symmetric.
        if (a.size() <= b.size()) {
            result.p_value = mwu_exact_p(doubled, a.size(), std::llround(2.0 * rank_sum_a));
        } else {
            std::rotate(doubled.begin(), doubled.begin() + static_cast<std::ptrdiff_t>(a.size()), doubled.end());
            const double rank_sum_b = n * (n + 1.0) / 2.0 - rank_sum_a;
            result.p_value = mwu_exact_p(doubled, b.size(), std::llround(2.0 * rank_sum_b));
        }
        return result;
    }

    const double mean = na * nb / 2.0;
    const double ties = tie_correction_sum(tie_groups(pooled));
    const double variance = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if (variance <= 0.0) {
        result.p_value = 1.0;
        return result;
    }
    const double z = std::max(std::abs(result.statistic - mean) - 0.5, 0.0) / std::sqrt(variance);
    result.p_value = clamp_probability(2.0 * normal_sf(z));
    return result;
}

TestResult chi_square_gof(std::span<const double> observed, std::span<const double> expected_proportions)
{
    if (observed.size() != expected_proportions.size() || observed.size() < 2)
        throw std::invalid_argument("chi_square_gof: need matching observed/expected with >= 2 cells");
    const double total = std::accumulate(observed.begin(), observed.end(), 0.0);
    if (!(total > 0.0)) throw std::invalid_argument("chi_square_gof: no observations");
    const double prop_sum = std::accumulate(expected_proportions.begin(), expected_proportions.end(), 0.0);
    if (std::abs(prop_sum - 1.0) > 1e-9) throw std::invalid_argument("chi_square_gof: proportions must sum to 1");

    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (observed[i] < 0.0) throw std::invalid_argument("chi_square_gof: negative count");
        const double expected = total * expected_proportions[i];
        if (!(expected > 0.0)) throw std::invalid_argument("chi_square_gof: zero expected cell");
        const double diff = observed[i] - expected;
        stat += diff * diff / expected;
    }
    TestResult result;
    result.method = Method::ChiSquareGof;
    result.statistic = stat;
    result.df = static_cast<int>(observed.size()) - 1;
    result.p_value = chi_squared_sf(stat, *result.df);
    return result;
}

namespace {

void add_tie_terms(std::span<const std::int64_t> groups, double& v0, double& v1, double& v2, std::int64_t& tied_pairs)
{
    for (auto t : groups) {
        const double td = static_cast<double>(t);
        v0 += td * (td - 1.0) * (2.0 * td + 5.0);
        v1 += td * (td - 1.0);
        v2 += td * (td - 1.0) * (td - 2.0);
        tied_pairs += t * (t - 1) / 2;
    }
}

void check_kendall_inputs(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) throw std::invalid_argument("kendall_tau_b: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("kendall_tau_b: need at least two observations");
    require_finite(x, "kendall_tau_b");
    require_finite(y, "kendall_tau_b");
}

std::int64_t merge_count_swaps(std::vector<double>& v, std::vector<double>& buffer, std::size_t lo, std::size_t hi)
{
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::int64_t swaps = merge_count_swaps(v, buffer, lo, mid) + merge_count_swaps(v, buffer, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            swaps += static_cast<std::int64_t>(mid - i);
            buffer[k++] = v[j++];
        } else {
            buffer[k++] = v[i++];
        }
    }
    while (i < mid) buffer[k++] = v[i++];
    while (j < hi) buffer[k++] = v[j++];
    std::copy(buffer.begin() + static_cast<std::ptrdiff_t>(lo), buffer.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

}  // namespace

KendallCounts kendall_counts_fast(std::span<const double> x, std::span<const double> y)
{
    check_kendall_inputs(x, y);
    const std::size_t n = x.size();
    KendallCounts c;
    c.n = static_cast<std::int64_t>(n);
    c.pairs = c.n * (c.n - 1) / 2;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });

    // Joint ties: runs equal in both x and y after the lexicographic sort.
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && x[order[j]] == x[order[i]] && y[order[j]] == y[order[i]]) ++j;
        const auto t = static_cast<std::int64_t>(j - i);
        c.tied_xy += t * (t - 1) / 2;
        i = j;
    }

    add_tie_terms(tie_groups({x.begin(), x.end()}), c.x_v0, c.x_v1, c.x_v2, c.tied_x);
    add_tie_terms(tie_groups({y.begin(), y.end()}), c.y_v0, c.y_v1, c.y_v2, c.tied_y);

    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
    std::vector<double> buffer(n);
    const std::int64_t discordant = merge_count_swaps(ys, buffer, 0, n);

    c.concordant_minus_discordant = c.pairs - c.tied_x - c.tied_y + c.tied_xy - 2 * discordant;
    return c;
}

KendallCounts kendall_counts_quadratic(std::span<const double> x, std::span<const double> y)
{
    check_kendall_inputs(x, y);
    const std::size_t n = x.size();
    KendallCounts c;
    c.n = static_cast<std::int64_t>(n);
    c.pairs = c.n * (c.n - 1) / 2;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[j] - x[i];
            const double dy = y[j] - y[i];
            if (dx == 0.0 && dy == 0.0) {
                ++c.tied_xy;
                ++c.tied_x;
                ++c.tied_y;
            } else if (dx == 0.0) {
                ++c.tied_x;
            } else if (dy == 0.0) {
                ++c.tied_y;
            } else {
                c.concordant_minus_discordant += ((dx > 0.0) == (dy > 0.0)) ? 1 : -1;
            }
        }
    }
    std::int64_t unused = 0;
    add_tie_terms(tie_groups({x.begin(), x.end()}), c.x_v0, c.x_v1, c.x_v2, unused);
    add_tie_terms(tie_groups({y.begin(), y.end()}), c.y_v0, c.y_v1, c.y_v2, unused);
    return c;
}

TestResult kendall_tau_b_from_counts(const KendallCounts& c)
{
    const double untied_x = static_cast<double>(c.pairs - c.tied_x);
    const double untied_y = static_cast<double>(c.pairs - c.tied_y);
    if (untied_x <= 0.0 || untied_y <= 0.0)
        throw std::invalid_argument("kendall_tau_b: degenerate input (a variable is entirely tied)");

    const double s = static_cast<double>(c.concordant_minus_discordant);
    TestResult result;
    result.method = Method::KendallTauB;
    result.statistic = std::clamp(s / std::sqrt(untied_x * untied_y), -1.0, 1.0);

    const double n = static_cast<double>(c.n);
    double variance = (n * (n - 1.0) * (2.0 * n + 5.0) - c.x_v0 - c.y_v0) / 18.0 +
                      c.x_v1 * c.y_v1 / (2.0 * n * (n - 1.0));
    if (c.n > 2) variance += c.x_v2 * c.y_v2 / (9.0 * n * (n - 1.0) * (n - 2.0));
    if (variance <= 0.0) {
        result.p_value = 1.0;
    } else {
        result.p_value = clamp_probability(2.0 * normal_sf(std::abs(s) / std::sqrt(variance)));
    }
    return result;
}

TestResult kendall_tau_b(std::span<const double> x, std::span<const double> y)
{
    return kendall_tau_b_from_counts(kendall_counts_fast(x, y));
}

TestResult kendall_tau_b_quadratic(std::span<const double> x, std::span<const double> y)
{
    return kendall_tau_b_from_counts(kendall_counts_quadratic(x, y));
}

double cliffs_delta(std::span<const double> a, std::span<const double> b)
{
    if (a.empty() || b.empty()) throw std::invalid_argument("cliffs_delta: empty sample");
    require_finite(a, "cliffs_delta");
    require_finite(b, "cliffs_delta");
    std::vector<double> sorted_b(b.begin(), b.end());
    std::sort(sorted_b.begin(), sorted_b.end());
    std::int64_t balance = 0;
    for (double v : a) {
        const auto below = std::lower_bound(sorted_b.begin(), sorted_b.end(), v) - sorted_b.begin();
        const auto above = sorted_b.end() - std::upper_bound(sorted_b.begin(), sorted_b.end(), v);
        balance += below - above;
    }
    return static_cast<double>(balance) / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

TestResult jarque_bera(std::span<const double> x)
{
    if (x.size() < 8) throw std::invalid_argument("jarque_bera: need at least 8 observations");
    require_finite(x, "jarque_bera");
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (!(m2 > 0.0)) throw std::invalid_argument("jarque_bera: constant sample");
    const double skew = m3 / std::pow(m2, 1.5);
    const double kurt = m4 / (m2 * m2);
    TestResult result;
    result.method = Method::JarqueBera;
    result.statistic = n / 6.0 * (skew * skew + (kurt - 3.0) * (kurt - 3.0) / 4.0);
    result.df = 2;
    result.p_value = chi_squared_sf(result.statistic, 2.0);
    return result;
}

namespace {

struct Fit {
    double mean;
    double sd;
};

Fit fit_normal(std::span<const double> x)
{
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

double ks_distance_normal(std::span<const double> x, double mean, double sd)
{
    if (!(sd > 0.0)) throw std::invalid_argument("ks_distance_normal: sd must be positive");
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = normal_cdf((sorted[i] - mean) / sd);
        const double above = static_cast<double>(i + 1) / n - f;
        const double below = f - static_cast<double>(i) / n;
        d = std::max({d, above, below});
    }
    return d;
}

TestResult ks_normality(std::span<const double> x, KsVariant variant, const KsOptions& options)
{
    if (x.size() < 5) throw std::invalid_argument("ks_normality: need at least 5 observations");
    require_finite(x, "ks_normality");
    const Fit fit = fit_normal(x);
    const double n = static_cast<double>(x.size());

    TestResult result;
    if (variant == KsVariant::Kolmogorov) {
        const double mean = options.mean.value_or(fit.mean);
        const double sd = options.sd.value_or(fit.sd);
        if (!(sd > 0.0)) throw std::invalid_argument("ks_normality: constant sample");
        result.method = Method::Kolmogorov;
        result.statistic = ks_distance_normal(x, mean, sd);
        const double root_n = std::sqrt(n);
        result.p_value = kolmogorov_sf((root_n + 0.12 + 0.11 / root_n) * result.statistic);
        return result;
    }

    if (!(fit.sd > 0.0)) throw std::invalid_argument("ks_normality: constant sample");
    if (options.simulations == 0) throw std::invalid_argument("ks_normality: need at least one simulation");
    result.method = Method::Lilliefors;
    result.statistic = ks_distance_normal(x, fit.mean, fit.sd);

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> draw(x.size());
    std::size_t at_least = 0;
    for (std::size_t s = 0; s < options.simulations; ++s) {
        for (auto& v : draw) v = normal(rng);
        const Fit f = fit_normal(draw);
        if (ks_distance_normal(draw, f.mean, f.sd) >= result.statistic) ++at_least;
    }
    result.p_value = static_cast<double>(at_least + 1) / static_cast<double>(options.simulations + 1);
    return result;
}

namespace {

void check_correlation_matrix(const Matrix& r, const char* what)
{
    if (r.rows() != r.cols() || r.rows() < 2) throw std::invalid_argument(std::string(what) + ": need a square matrix of size >= 2");
    if (!r.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        if (std::abs(r(i, i) - 1.0) > 1e-9) throw std::invalid_argument(std::string(what) + ": diagonal must be 1");
        for (Eigen::Index j = i + 1; j < r.cols(); ++j) {
            if (std::abs(r(i, j) - r(j, i)) > 1e-9) throw std::invalid_argument(std::string(what) + ": matrix not symmetric");
        }
    }
}

constexpr double kSingularEigenvalue = 1e-12;

}  // namespace

TestResult bartlett_sphericity(const Matrix& r, std::size_t n)
{
    check_correlation_matrix(r, "bartlett_sphericity");
    const auto p = static_cast<double>(r.rows());
    if (static_cast<double>(n) <= p) throw std::invalid_argument("bartlett_sphericity: need more observations than variables");

    const Eigen::SelfAdjointEigenSolver<Matrix> eig(r, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw std::invalid_argument("bartlett_sphericity: eigendecomposition failed");
    const Vector& values = eig.eigenvalues();
    if (values.minCoeff() < -1e-9) throw std::invalid_argument("bartlett_sphericity: matrix not positive semidefinite");

    TestResult result;
    result.method = Method::BartlettSphericity;
    result.df = static_cast<int>(p * (p - 1.0) / 2.0);
    if (values.minCoeff() <= kSingularEigenvalue) {
        result.statistic = std::numeric_limits<double>::max();
        result.p_value = 0.0;
        result.degenerate = true;
        return result;
    }
    const double log_det = values.array().log().sum();
    const double factor = static_cast<double>(n) - 1.0 - (2.0 * p + 5.0) / 6.0;
    result.statistic = std::max(-factor * log_det, 0.0);
    result.p_value = chi_squared_sf(result.statistic, *result.df);
    return result;
}

double kmo(const Matrix& r)
{
    check_correlation_matrix(r, "kmo");
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(r);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= kSingularEigenvalue)
        throw std::invalid_argument("kmo: singular correlation matrix");
    // Partial correlations only need the inverse up to a positive factor; for
    // two variables the adjugate gives them without rounding.
    Matrix inverse(r.rows(), r.cols());
    if (r.rows() == 2) {
        inverse << r(1, 1), -r(0, 1), -r(1, 0), r(0, 0);
    } else {
        inverse = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    }

    double raw = 0.0;
    double partial = 0.0;
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.cols(); ++j) {
            if (i == j) continue;
            const double q = -inverse(i, j) / std::sqrt(inverse(i, i) * inverse(j, j));
            raw += r(i, j) * r(i, j);
            partial += q * q;
        }
    }
    if (raw + partial == 0.0) throw std::invalid_argument("kmo: identity matrix has no off-diagonal structure");
    return raw / (raw + partial);
}

Adequacy classify_kmo(double value)
{
    if (value >= 0.9) return Adequacy::Marvelous;
    if (value >= 0.8) return Adequacy::Meritorious;
    if (value >= 0.7) return Adequacy::Middling;
    if (value >= 0.6) return Adequacy::Mediocre;
    if (value >= 0.5) return Adequacy::Miserable;
    return Adequacy::Unacceptable;
}

std::string_view to_string(Adequacy a)
{
    switch (a) {
        case Adequacy::Unacceptable: return "unacceptable";
        case Adequacy::Miserable: return "miserable";
        case Adequacy::Mediocre: return "mediocre";
        case Adequacy::Middling: return "middling";
        case Adequacy::Meritorious: return "meritorious";
        case Adequacy::Marvelous: return "marvelous";
    }
    return "unknown";
}

}  // namespace catspace::stats
