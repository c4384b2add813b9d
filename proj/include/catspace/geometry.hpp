#pragma once

// Taken-clusters, categorical spaces, dimensional proximity coordinates and
// activation-group contrasts.

#include "catspace/ingest.hpp"
#include "catspace/stats.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace catspace {

/// u.v / (|u| |v|) clamped to [-1, 1]. The dot product is accumulated in
/// double in index order, so equal inputs always give bit-equal results.
template <typename DerivedA, typename DerivedB>
double cosine_similarity(const Eigen::MatrixBase<DerivedA>& u, const Eigen::MatrixBase<DerivedB>& v)
{
    if (u.size() != v.size()) throw std::invalid_argument("cosine_similarity: dimension mismatch");
    double dot = 0.0, uu = 0.0, vv = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double a = static_cast<double>(u.coeff(i));
        const double b = static_cast<double>(v.coeff(i));
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if (uu == 0.0 || vv == 0.0) throw std::invalid_argument("cosine_similarity: zero vector");
    return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

struct TakenCluster {
    NeuronId target;
    NeuronId precursor;
    double weight = 0.0;
    std::vector<TokenId> tokens;  // sorted ascending
};

enum class OrderPolicy { SizeAscending, SizeDescending, ByWeight };
enum class SelfPolicy { Include, Exclude };

std::string_view to_string(OrderPolicy p);
std::string_view to_string(SelfPolicy p);
OrderPolicy parse_order_policy(std::string_view s);
SelfPolicy parse_self_policy(std::string_view s);

struct CategoricalSpace {
    NeuronId target;
    OrderPolicy order = OrderPolicy::SizeAscending;
    std::vector<TakenCluster> subdims;

    std::size_t dimension() const { return subdims.size(); }
    /// Number of different tokens across all clusters.
    std::size_t distinct_tokens() const;
    /// Sum of cluster sizes (tokens counted once per cluster).
    std::size_t summed_sizes() const;
};

struct ProximityRow {
    TokenId token;
    double activation = 0.0;
    std::vector<std::optional<double>> coords;  // one per sub-dimension; empty when undefined
    double mean = 0.0;                          // mean over defined coords
};

/// Rows follow the profile order (activation descending).
struct ProximityMatrix {
    NeuronId target;
    SelfPolicy self_policy = SelfPolicy::Include;
    std::vector<ProximityRow> rows;
};

struct GroupContrast {
    NeuronId target;
    std::size_t m = 0;
    double alpha_min = 0.0;
    double alpha_max = 0.0;
    double s_min = 0.0;
    double s_max = 0.0;
    double delta = 0.0;
    double kw_p = 1.0;
    double mwu_p = 1.0;
    double cliffs = 0.0;
};

/// Taken-clusters of `target` with its first k listed precursors; empty intersections are dropped.
std::vector<TakenCluster> build_taken_clusters(const Dataset& ds, NeuronId target, std::size_t k = 10);

CategoricalSpace build_categorical_space(std::vector<TakenCluster> clusters, std::size_t min_cluster_size, OrderPolicy order);

ProximityMatrix proximity_scores(const CategoricalSpace& space, const NeuronProfile& profile, const EmbeddingTable& emb,
                                 SelfPolicy self_policy = SelfPolicy::Include);

GroupContrast group_contrast(const ProximityMatrix& pm, std::size_t m = 10);

}  // namespace catspace
