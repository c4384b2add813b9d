#include "catspace/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

namespace catspace {

std::string_view to_string(OrderPolicy p)
{
    switch (p) {
    case OrderPolicy::SizeAscending: return "size-ascending";
    case OrderPolicy::SizeDescending: return "size-descending";
    case OrderPolicy::ByWeight: return "by-weight";
    }
    return "?";
}

std::string_view to_string(SelfPolicy p) { return p == SelfPolicy::Include ? "include" : "exclude"; }

OrderPolicy parse_order_policy(std::string_view s)
{
    if (s == "size-ascending" || s == "ascending") return OrderPolicy::SizeAscending;
    if (s == "size-descending" || s == "descending") return OrderPolicy::SizeDescending;
    if (s == "by-weight" || s == "weight") return OrderPolicy::ByWeight;
    throw ConfigError("unknown order policy '" + std::string(s) + "'");
}

SelfPolicy parse_self_policy(std::string_view s)
{
    if (s == "include") return SelfPolicy::Include;
    if (s == "exclude") return SelfPolicy::Exclude;
    throw ConfigError("unknown self policy '" + std::string(s) + "'");
}

std::size_t CategoricalSpace::distinct_tokens() const
{
    std::set<TokenId> all;
    for (const auto& c : subdims) all.insert(c.tokens.begin(), c.tokens.end());
    return all.size();
}

std::size_t CategoricalSpace::summed_sizes() const
{
    std::size_t n = 0;
    for (const auto& c : subdims) n += c.tokens.size();
    return n;
}

std::vector<TakenCluster> build_taken_clusters(const Dataset& ds, NeuronId target, std::size_t k)
{
    if (target.layer != 1) throw std::invalid_argument("build_taken_clusters: target must be a layer-1 neuron, got " + to_string(target));
    const NeuronProfile& profile = ds.profile(target);  // throws std::out_of_range for unknown neurons
    auto conn = ds.connections.find(target.index);
    if (conn == ds.connections.end()) throw DataError("no connections for " + to_string(target));

    std::vector<TokenId> core;
    core.reserve(profile.core_tokens.size());
    for (const auto& ct : profile.core_tokens) core.push_back(ct.token);
    std::sort(core.begin(), core.end());

    std::vector<TakenCluster> out;
    const std::size_t n = std::min(k, conn->second.entries.size());
    for (std::size_t i = 0; i < n; ++i) {
        const Connection& c = conn->second.entries[i];
        const NeuronProfile& pre = ds.profile(c.precursor);
        std::vector<TokenId> pre_tokens;
        pre_tokens.reserve(pre.core_tokens.size());
        for (const auto& ct : pre.core_tokens) pre_tokens.push_back(ct.token);
        std::sort(pre_tokens.begin(), pre_tokens.end());

        TakenCluster cluster{target, c.precursor, c.weight, {}};
        std::set_intersection(core.begin(), core.end(), pre_tokens.begin(), pre_tokens.end(),
                              std::back_inserter(cluster.tokens));
        if (!cluster.tokens.empty()) out.push_back(std::move(cluster));
    }
    return out;
}

CategoricalSpace build_categorical_space(std::vector<TakenCluster> clusters, std::size_t min_cluster_size, OrderPolicy order)
{
    CategoricalSpace space;
    space.order = order;
    if (!clusters.empty()) {
        space.target = clusters.front().target;
        for (const auto& c : clusters)
            if (c.target != space.target) throw std::invalid_argument("build_categorical_space: clusters of different targets");
    }
    std::erase_if(clusters, [&](const TakenCluster& c) { return c.tokens.size() < min_cluster_size; });

    auto by_index = [](const TakenCluster& a, const TakenCluster& b) { return a.precursor.index < b.precursor.index; };
    std::sort(clusters.begin(), clusters.end(), [&](const TakenCluster& a, const TakenCluster& b) {
        switch (order) {
        case OrderPolicy::SizeAscending:
            if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
            break;
        case OrderPolicy::SizeDescending:
            if (a.tokens.size() != b.tokens.size()) return a.tokens.size() > b.tokens.size();
            break;
        case OrderPolicy::ByWeight:
            if (a.weight != b.weight) return a.weight > b.weight;
            break;
        }
        return by_index(a, b);
    });
    space.subdims = std::move(clusters);
    return space;
}

ProximityMatrix proximity_scores(const CategoricalSpace& space, const NeuronProfile& profile, const EmbeddingTable& emb,
                                 SelfPolicy self_policy)
{
    if (space.subdims.empty()) throw std::invalid_argument("proximity_scores: empty categorical space");

    // Every token that appears as a row or inside a cluster gets one slot of the Gram matrix.
    std::vector<TokenId> tokens;
    std::unordered_map<std::uint32_t, std::size_t> slot;
    auto add = [&](TokenId t) {
        if (!emb.contains(t)) throw DataError("token " + std::to_string(t.value) + " has no embedding");
        if (slot.emplace(t.value, tokens.size()).second) tokens.push_back(t);
    };
    for (const auto& ct : profile.core_tokens) add(ct.token);
    for (const auto& c : space.subdims)
        for (TokenId t : c.tokens) add(t);

    const std::size_t n = tokens.size();
    Matrix gram(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        gram(a, a) = cosine_similarity(emb.row(tokens[a]), emb.row(tokens[a]));
        for (std::size_t b = a + 1; b < n; ++b) {
            const double v = cosine_similarity(emb.row(tokens[a]), emb.row(tokens[b]));
            gram(a, b) = v;
            gram(b, a) = v;
        }
    }

    std::vector<std::vector<std::size_t>> cluster_slots;
    for (const auto& c : space.subdims) {
        auto& s = cluster_slots.emplace_back();
        for (TokenId t : c.tokens) s.push_back(slot.at(t.value));
    }

    ProximityMatrix pm;
    pm.target = space.target;
    pm.self_policy = self_policy;
    pm.rows.reserve(profile.core_tokens.size());
    for (const auto& ct : profile.core_tokens) {
        const std::size_t j = slot.at(ct.token.value);
        ProximityRow row{ct.token, ct.activation, {}, 0.0};
        double total = 0.0;
        std::size_t defined = 0;
        for (const auto& members : cluster_slots) {
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t t : members) {
                if (self_policy == SelfPolicy::Exclude && t == j) continue;
                sum += gram(j, t);
                ++count;
            }
            if (count == 0) {
                row.coords.emplace_back(std::nullopt);
                continue;
            }
            const double s = std::clamp(sum / static_cast<double>(count), -1.0, 1.0);
            row.coords.emplace_back(s);
            total += s;
            ++defined;
        }
        row.mean = defined ? total / static_cast<double>(defined) : std::numeric_limits<double>::quiet_NaN();
        pm.rows.push_back(std::move(row));
    }
    return pm;
}

GroupContrast group_contrast(const ProximityMatrix& pm, std::size_t m)
{
    if (m == 0) throw std::invalid_argument("group_contrast: m must be positive");
    if (pm.rows.size() < 2 * m)
        throw std::invalid_argument("group_contrast: " + std::to_string(pm.rows.size()) + " rows, need at least " + std::to_string(2 * m));

    // Rank by activation descending, token id ascending: top group = first m, bottom group = last m.
    std::vector<std::size_t> order(pm.rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = pm.rows[a];
        const auto& rb = pm.rows[b];
        if (ra.activation != rb.activation) return ra.activation > rb.activation;
        return ra.token < rb.token;
    });

    std::vector<double> top, bottom;
    double a_top = 0.0, a_bottom = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& hi = pm.rows[order[i]];
        const auto& lo = pm.rows[order[order.size() - m + i]];
        if (std::isnan(hi.mean) || std::isnan(lo.mean))
            throw std::invalid_argument("group_contrast: undefined mean proximity in a selected row");
        top.push_back(hi.mean);
        bottom.push_back(lo.mean);
        a_top += hi.activation;
        a_bottom += lo.activation;
    }

    const double dm = static_cast<double>(m);
    GroupContrast g;
    g.target = pm.target;
    g.m = m;
    g.alpha_min = a_bottom / dm;
    g.alpha_max = a_top / dm;
    g.s_min = std::accumulate(bottom.begin(), bottom.end(), 0.0) / dm;
    g.s_max = std::accumulate(top.begin(), top.end(), 0.0) / dm;
    g.delta = g.s_max - g.s_min;
    g.kw_p = m > 1 ? stats::kruskal_wallis({bottom, top}).p_value : 1.0;
    g.mwu_p = stats::mann_whitney_u(top, bottom).p_value;
    g.cliffs = stats::cliffs_delta(top, bottom);
    return g;
}

}  // namespace catspace
