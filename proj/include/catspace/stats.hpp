#pragma once

// Nonparametric and distributional tests used by the experiment pipelines.
//
// All functions are pure. Preconditions that callers can check beforehand
// (empty samples, mismatched lengths) raise std::invalid_argument; Monte Carlo
// routines take an explicit seed.

#include "catspace/core.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace catspace::stats {

enum class Method {
    KruskalWallis,
    MannWhitneyU,
    ChiSquareGof,
    KendallTauB,
    JarqueBera,
    Kolmogorov,
    Lilliefors,
    BartlettSphericity,
};

std::string_view to_string(Method m);

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::optional<int> df;
    Method method = Method::KruskalWallis;
    // Set when the statistic could not be formed normally (e.g. a singular
    // correlation matrix for Bartlett); statistic is then the largest double.
    bool degenerate = false;
};

// Distribution helpers, exposed for tests and reports.
double chi_squared_sf(double x, double df);
double normal_cdf(double z);
double normal_sf(double z);
double normal_quantile(double p);
/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_sf(double lambda);

/// Mid-ranks (1-based, ties averaged) of a sample.
std::vector<double> midranks(std::span<const double> x);

TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

enum class MwuMethod { Auto, Exact, Normal };

/// Statistic is U for sample `a`: #(a > b) + 0.5 #(a == b). Two-sided p.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                          MwuMethod method = MwuMethod::Auto);

TestResult chi_square_gof(std::span<const double> observed, std::span<const double> expected_proportions);

/// Pair counts underlying tau-b. Shared by the fast and the quadratic routes.
struct KendallCounts {
    std::int64_t n = 0;
    std::int64_t concordant_minus_discordant = 0;
    std::int64_t pairs = 0;
    std::int64_t tied_x = 0;     // pairs tied in x (including joint ties)
    std::int64_t tied_y = 0;     // pairs tied in y (including joint ties)
    std::int64_t tied_xy = 0;    // pairs tied in both
    // Tie-group sums for the variance of S.
    double x_v0 = 0.0, x_v1 = 0.0, x_v2 = 0.0;
    double y_v0 = 0.0, y_v1 = 0.0, y_v2 = 0.0;
};

KendallCounts kendall_counts_fast(std::span<const double> x, std::span<const double> y);
KendallCounts kendall_counts_quadratic(std::span<const double> x, std::span<const double> y);

TestResult kendall_tau_b_from_counts(const KendallCounts& c);

/// O(n log n) merge-sort based tau-b.
TestResult kendall_tau_b(std::span<const double> x, std::span<const double> y);
/// O(n^2) pair enumeration; used as the oracle for the fast route.
TestResult kendall_tau_b_quadratic(std::span<const double> x, std::span<const double> y);

/// (#(a_i > b_j) - #(a_i < b_j)) / (n_a n_b)
double cliffs_delta(std::span<const double> a, std::span<const double> b);

TestResult jarque_bera(std::span<const double> x);

enum class KsVariant { Kolmogorov, Lilliefors };

struct KsOptions {
    // Fully specified reference normal for the Kolmogorov variant. When
    // absent the normal is fitted from the sample (mean, n-1 deviation).
    std::optional<double> mean;
    std::optional<double> sd;
    std::size_t simulations = 10000;
    std::uint64_t seed = 20240601;
};

/// sup |F_n - Phi| with the supremum taken at both sides of every step.
double ks_distance_normal(std::span<const double> x, double mean, double sd);

TestResult ks_normality(std::span<const double> x, KsVariant variant, const KsOptions& options = {});

/// Bartlett's sphericity test on a correlation matrix from n observations.
TestResult bartlett_sphericity(const Matrix& r, std::size_t n);

/// Kaiser-Meyer-Olkin sampling adequacy of a correlation matrix.
double kmo(const Matrix& r);

enum class Adequacy { Unacceptable, Miserable, Mediocre, Middling, Meritorious, Marvelous };

/// Kaiser's verbal labels for KMO values (.5/.6/.7/.8/.9 cut points).
Adequacy classify_kmo(double value);
std::string_view to_string(Adequacy a);
inline bool is_low_adequacy(double value) { return value < 0.7; }

}  // namespace catspace::stats
