#pragma once

// The three studies over a Dataset: activation-group contrasts (Table 1),
// ordinal correlation on the mean neuron (Table 2, Graph 1) and the factor
// structure of the mean neuron (Graphs 2-4).
//
// Per-neuron work runs on a thread pool; results are stored by position in
// the sorted neuron list and reduced in that order, so aggregates do not
// depend on scheduling.

#include "catspace/geometry.hpp"
#include "catspace/pca.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace catspace::experiments {

enum class DistinctCount { Union, SummedSizes };

struct AnalysisParams {
    std::size_t k = 10;
    std::size_t m = 10;
    std::size_t min_cluster_size = 6;
    std::size_t min_clusters = 3;
    std::size_t min_distinct_tokens = 40;
    DistinctCount distinct = DistinctCount::Union;
    SelfPolicy self_policy = SelfPolicy::Include;
    std::size_t d_tau = 3;
    std::size_t d_pca = 4;
    std::size_t sample_circles = 6;
    unsigned threads = 0;  // 0: hardware concurrency
};

/// Check the parameter invariants, throwing ConfigError.
void validate(const AnalysisParams& p);

/// Categorical space of every layer-1 neuron with connections, ordered by neuron index.
std::vector<CategoricalSpace> all_spaces(const Dataset& ds, const AnalysisParams& p, OrderPolicy order);

// --- Table 1 -------------------------------------------------------------------

struct Table1Aggregate {
    std::size_t n = 0;
    double mean_alpha_min = 0.0;
    double mean_alpha_max = 0.0;
    double mean_s_min = 0.0;
    double mean_s_max = 0.0;
    double mean_delta = 0.0;
    double pct_delta_pos = 0.0;
    double p_chi = 1.0;
    double pct_kw_sig = 0.0;
    double mean_cliffs = 0.0;
    // Reported alongside the KW share.
    double pct_mwu_sig = 0.0;
};

struct Table1Result {
    Table1Aggregate aggregate;
    std::vector<GroupContrast> per_neuron;  // sorted by neuron index
};

std::vector<CategoricalSpace> filter_table1(const Dataset& ds, const AnalysisParams& p = {});

Table1Aggregate aggregate_contrasts(const std::vector<GroupContrast>& contrasts);

Table1Result run_group_comparison(const Dataset& ds, const AnalysisParams& p = {});

// --- mean neuron -------------------------------------------------------------

/// Spaces with exactly d clusters of at least min_cluster_size tokens.
std::vector<CategoricalSpace> filter_exact_d(const Dataset& ds, std::size_t d, const AnalysisParams& p = {});

inline constexpr std::size_t kMeanNeuronRows = 100;

struct MeanRow {
    double activation = 0.0;
    std::vector<double> proximity;  // one per ordered sub-dimension
    double mean_proximity = 0.0;    // mean over neurons of s_ij
};

struct MeanNeuron {
    std::size_t d = 0;
    OrderPolicy order = OrderPolicy::SizeAscending;
    std::vector<NeuronId> neurons;  // contributing neurons
    std::vector<NeuronId> dropped;  // fewer than 100 core-tokens
    std::vector<MeanRow> rows;      // activation rank ascending

    /// rows x (d) proximity block.
    Matrix proximity_matrix() const;
    std::vector<double> activation_column() const;
    std::vector<double> proximity_column(std::size_t k) const;
    std::vector<double> mean_proximity_column() const;
};

/// A neuron's proximity coordinates with rows ordered by activation ascending
/// (ties: token id descending, the reverse of the profile order).
ProximityMatrix ranked_proximity(const CategoricalSpace& space, const Dataset& ds, SelfPolicy self_policy);

MeanNeuron build_mean_neuron(const std::vector<CategoricalSpace>& spaces, const Dataset& ds, OrderPolicy order,
                             SelfPolicy self_policy = SelfPolicy::Include, unsigned threads = 0);

// --- Table 2 -------------------------------------------------------------------

struct DimensionTau {
    double tau = 0.0;
    double p_value = 1.0;
};

struct TauReport {
    std::size_t n_neurons = 0;
    std::size_t d = 0;
    std::vector<DimensionTau> dims;
    MeanNeuron mean;  // Graph-1 series: activation against each proximity column
};

TauReport run_ordinal_correlation(const Dataset& ds, const AnalysisParams& p = {});
TauReport ordinal_correlation(MeanNeuron mean);

// --- PCA structure -------------------------------------------------------------

struct Projection {
    std::size_t rank = 0;  // 1-based activation rank
    double activation = 0.0;
    std::vector<double> scores;
};

struct NeuronPca {
    NeuronId neuron;
    pca::PcaResult<double> result;
    std::vector<pca::CirclePoint> circle;
};

struct PcaStructure {
    std::size_t n_neurons = 0;
    std::size_t d = 0;
    MeanNeuron mean;
    pca::PcaResult<double> result;
    std::vector<pca::CirclePoint> circle;  // factors 1 and 2
    std::vector<Projection> projections;
    std::vector<NeuronPca> per_neuron;
    std::vector<std::string> skipped;      // per-neuron PCAs that could not be formed
    DimensionTau activation_vs_factor1;
    DimensionTau factor1_vs_mean_proximity;
};

PcaStructure run_pca_structure(const Dataset& ds, const AnalysisParams& p = {});

// --- utilities -----------------------------------------------------------------

unsigned resolve_threads(unsigned requested);

/// Calls fn(i) for i in [0, n) on up to `threads` workers. The first exception is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace catspace::experiments
