#include "catspace/experiments.hpp"
#include "catspace/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numeric>
#include <random>

using namespace catspace;
using namespace catspace::experiments;
using doctest::Approx;

namespace {

std::vector<std::uint32_t> span_of(std::uint32_t from, std::uint32_t to)
{
    std::vector<std::uint32_t> v(to - from);
    std::iota(v.begin(), v.end(), from);
    return v;
}

// One layer-1 neuron whose taken-clusters are exactly `clusters`, one
// layer-0 precursor per cluster.
Dataset with_clusters(const std::vector<std::vector<std::uint32_t>>& clusters)
{
    Dataset ds;
    std::mt19937_64 rng(1);
    std::normal_distribution<float> n(0.0f, 1.0f);
    ds.embeddings.data.resize(200, 8);
    for (Eigen::Index i = 0; i < ds.embeddings.data.size(); ++i) ds.embeddings.data.data()[i] = n(rng);
    std::set<std::uint32_t> all;
    ConnectionWeights conn{{1, 0}, {}};
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        NeuronProfile p{{0, static_cast<int>(c)}, {}};
        for (auto t : clusters[c]) {
            p.core_tokens.push_back({TokenId{t}, 1.0, ""});
            all.insert(t);
        }
        sort_core_tokens(p);
        ds.profiles_l0[static_cast<int>(c)] = p;
        conn.entries.push_back({{0, static_cast<int>(c)}, 1.0 - 0.01 * c});
    }
    NeuronProfile target{{1, 0}, {}};
    double a = 1.0;
    for (auto t : all) target.core_tokens.push_back({TokenId{t}, a += 1.0, ""});
    sort_core_tokens(target);
    ds.profiles_l1[0] = target;
    ds.connections[0] = conn;
    return ds;
}

synth::SynthConfig planted_config(std::uint64_t seed)
{
    synth::SynthConfig c;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("table 1 filter thresholds")
{
    const Dataset small = with_clusters({span_of(0, 6), span_of(6, 12), span_of(12, 18)});
    CHECK(filter_table1(small).empty());
    AnalysisParams loose;
    loose.min_distinct_tokens = 18;
    CHECK(filter_table1(small, loose).size() == 1);

    // sizes 10, 15, 20 with a union of 41
    const Dataset big = with_clusters({span_of(0, 10), span_of(10, 25), span_of(21, 41)});
    const auto kept = filter_table1(big);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].distinct_tokens() == 41);
    CHECK(kept[0].summed_sizes() == 45);

    // overlapping clusters: union 30, summed 45
    const Dataset overlap = with_clusters({span_of(0, 15), span_of(5, 20), span_of(15, 30)});
    CHECK(filter_table1(overlap).empty());
    AnalysisParams summed;
    summed.distinct = DistinctCount::SummedSizes;
    CHECK(filter_table1(overlap, summed).size() == 1);

    // two clusters only
    CHECK(filter_table1(with_clusters({span_of(0, 30), span_of(30, 60)})).empty());
    // small clusters do not count towards the three
    CHECK(filter_table1(with_clusters({span_of(0, 30), span_of(30, 60), span_of(60, 65)})).empty());
}

TEST_CASE("exact-d filter")
{
    const Dataset four = with_clusters({span_of(0, 6), span_of(6, 12), span_of(12, 18), span_of(18, 24)});
    CHECK(filter_exact_d(four, 3).empty());
    CHECK(filter_exact_d(four, 4).size() == 1);
    const auto& fx = testing::fixture();
    std::size_t d3 = 0, d4 = 0;
    for (const auto& p : fx.planted) (p.clusters.size() == 3 ? d3 : d4)++;
    CHECK(filter_exact_d(fx.dataset, 3).size() == d3);
    CHECK(filter_exact_d(fx.dataset, 4).size() == d4);
    CHECK_THROWS_AS(filter_exact_d(fx.dataset, 0), std::invalid_argument);
}

TEST_CASE("aggregation")
{
    std::vector<GroupContrast> gs(4);
    gs[0].delta = 0.0;
    gs[1].delta = 0.1;
    gs[2].delta = 0.2;
    gs[3].delta = -0.1;
    gs[1].kw_p = 0.01;
    const auto a = aggregate_contrasts(gs);
    CHECK(a.n == 4);
    CHECK(a.pct_delta_pos == 50.0);
    CHECK(a.pct_kw_sig == 25.0);
    CHECK(a.mean_delta == Approx(0.05));
    CHECK(a.p_chi == 1.0);
    CHECK_THROWS_AS(aggregate_contrasts({}), DataError);
}

TEST_CASE("fixture table 1 regression")
{
    const auto& fx = testing::fixture();
    const auto r = run_group_comparison(fx.dataset);
    CHECK(r.aggregate.n == 8);
    CHECK(r.aggregate.pct_delta_pos == 100.0);
    CHECK(r.aggregate.p_chi == Approx(stats::chi_squared_sf(8.0, 1.0)));
    CHECK(r.aggregate.p_chi == Approx(0.0047).epsilon(0.01));
    for (std::size_t i = 1; i < r.per_neuron.size(); ++i) CHECK(r.per_neuron[i - 1].target < r.per_neuron[i].target);
    for (const auto& g : r.per_neuron) CHECK(g.delta == g.s_max - g.s_min);
    CHECK(r.aggregate.pct_kw_sig >= 0.0);
    CHECK(r.aggregate.pct_kw_sig <= 100.0);
}

TEST_CASE("results do not depend on thread count")
{
    const auto data = synth::generate(planted_config(7));
    AnalysisParams one, many;
    one.threads = 1;
    many.threads = 8;
    const auto a = run_group_comparison(data.dataset, one);
    const auto b = run_group_comparison(data.dataset, many);
    CHECK(a.aggregate.mean_delta == b.aggregate.mean_delta);
    CHECK(a.aggregate.mean_cliffs == b.aggregate.mean_cliffs);
    CHECK(a.aggregate.p_chi == b.aggregate.p_chi);
    const auto ta = run_ordinal_correlation(data.dataset, one);
    const auto tb = run_ordinal_correlation(data.dataset, many);
    for (std::size_t k = 0; k < ta.dims.size(); ++k) CHECK(ta.dims[k].tau == tb.dims[k].tau);

    // aggregate is a function of the sorted per-neuron list
    auto shuffled = a.per_neuron;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(3));
    std::sort(shuffled.begin(), shuffled.end(), [](const auto& x, const auto& y) { return x.target < y.target; });
    CHECK(aggregate_contrasts(shuffled).mean_delta == a.aggregate.mean_delta);
}

TEST_CASE("mean neuron")
{
    const auto& fx = testing::fixture();
    const auto spaces = filter_exact_d(fx.dataset, 4);
    REQUIRE(spaces.size() >= 2);

    // one neuron: the mean is its ranked matrix
    const auto single = build_mean_neuron({spaces[0]}, fx.dataset, OrderPolicy::SizeAscending);
    const auto ranked = ranked_proximity(spaces[0], fx.dataset, SelfPolicy::Include);
    REQUIRE(single.rows.size() == kMeanNeuronRows);
    for (std::size_t r = 0; r < kMeanNeuronRows; ++r) {
        CHECK(single.rows[r].activation == ranked.rows[r].activation);
        for (std::size_t k = 0; k < 4; ++k) CHECK(single.rows[r].proximity[k] == *ranked.rows[r].coords[k]);
        if (r) CHECK(single.rows[r].activation >= single.rows[r - 1].activation);
    }

    // duplicating every neuron leaves the mean unchanged
    const auto mean = build_mean_neuron(spaces, fx.dataset, OrderPolicy::SizeDescending);
    auto doubled = spaces;
    doubled.insert(doubled.end(), spaces.begin(), spaces.end());
    const auto mean2 = build_mean_neuron(doubled, fx.dataset, OrderPolicy::SizeDescending);
    for (std::size_t r = 0; r < kMeanNeuronRows; ++r) {
        CHECK(mean2.rows[r].activation == Approx(mean.rows[r].activation).epsilon(1e-12));
        for (std::size_t k = 0; k < 4; ++k) CHECK(mean2.rows[r].proximity[k] == Approx(mean.rows[r].proximity[k]).epsilon(1e-12));
        CHECK(mean2.rows[r].mean_proximity == Approx(mean.rows[r].mean_proximity).epsilon(1e-12));
    }

    // brute-force average of the per-neuron ranked matrices, descending order
    for (std::size_t r = 0; r < kMeanNeuronRows; r += 17) {
        double act = 0.0, first = 0.0;
        for (const auto& s : spaces) {
            auto desc = build_categorical_space(s.subdims, 0, OrderPolicy::SizeDescending);
            desc.target = s.target;
            const auto pm = ranked_proximity(desc, fx.dataset, SelfPolicy::Include);
            act += pm.rows[r].activation;
            first += *pm.rows[r].coords[0];
        }
        CHECK(mean.rows[r].activation == Approx(act / spaces.size()).epsilon(1e-12));
        CHECK(mean.rows[r].proximity[0] == Approx(first / spaces.size()).epsilon(1e-12));
    }
    CHECK(mean.proximity_matrix().rows() == 100);
    CHECK(mean.proximity_matrix().cols() == 4);

    auto mixed = filter_exact_d(fx.dataset, 3);
    mixed.push_back(spaces[0]);
    CHECK_THROWS_AS(build_mean_neuron(mixed, fx.dataset, OrderPolicy::SizeAscending), std::invalid_argument);
    CHECK_THROWS_AS(build_mean_neuron({}, fx.dataset, OrderPolicy::SizeAscending), DataError);
}

TEST_CASE("short profiles are dropped from the mean neuron")
{
    Dataset ds = testing::fixture().dataset;
    const auto spaces = filter_exact_d(ds, 4);
    REQUIRE(spaces.size() >= 2);
    auto& prof = ds.profiles_l1.at(spaces[1].target.index);
    prof.core_tokens.pop_back();
    const auto mean = build_mean_neuron(spaces, ds, OrderPolicy::SizeAscending);
    REQUIRE(mean.dropped.size() == 1);
    CHECK(mean.dropped[0] == spaces[1].target);
    CHECK(mean.neurons.size() == spaces.size() - 1);
}

TEST_CASE("planted seed 7 ordinal correlation and pca")
{
    const auto data = synth::generate(planted_config(7));
    const auto tau = run_ordinal_correlation(data.dataset);
    REQUIRE(tau.dims.size() == 3);
    for (const auto& d : tau.dims) {
        CHECK(d.tau >= 0.9);
        CHECK(d.p_value < 1e-4);
    }
    CHECK(tau.mean.rows.size() == 100);
    const auto col = tau.mean.proximity_column(0);
    CHECK(tau.dims[0].tau == Approx(oracle::tau_b(tau.mean.activation_column(), col)).epsilon(1e-12));

    const auto pca = run_pca_structure(data.dataset);
    CHECK(pca.d == 4);
    CHECK(pca.result.explained_ratio(0) > 0.99);
    for (const auto& pt : pca.circle) CHECK(pt.x > 0.0);
    CHECK(pca.factor1_vs_mean_proximity.tau > 0.9);
    CHECK(pca.activation_vs_factor1.tau > 0.7);
    CHECK(pca.projections.size() == 100);
    CHECK(pca.per_neuron.size() + pca.skipped.size() == 6);
    CHECK(pca.result.bartlett.p_value < 1e-4);
    REQUIRE(pca.result.kmo.has_value());
}

TEST_CASE("zero noise gives perfect ordinal correlation")
{
    auto c = planted_config(7);
    c.noise_sigma = 0.0;
    c.embedding_noise = 0.0;
    c.neurons_per_layer = 128;
    const auto tau = run_ordinal_correlation(synth::generate(c).dataset);
    for (const auto& d : tau.dims) CHECK(d.tau == 1.0);
}

TEST_CASE("parameter validation")
{
    AnalysisParams p;
    CHECK_NOTHROW(validate(p));
    p.k = 11;
    CHECK_THROWS_AS(validate(p), ConfigError);
    p = {};
    p.m = 0;
    CHECK_THROWS_AS(validate(p), ConfigError);
    p = {};
    p.d_tau = 0;
    CHECK_THROWS_AS(validate(p), ConfigError);
    p = {};
    p.d_pca = 1;
    CHECK_THROWS_AS(run_pca_structure(testing::fixture().dataset, p), ConfigError);
    p = {};
    p.d_tau = 7;
    CHECK_THROWS_AS(run_ordinal_correlation(testing::fixture().dataset, p), DataError);
}

TEST_CASE("parallel_for rethrows")
{
    std::vector<int> hit(100, 0);
    parallel_for(100, 4, [&](std::size_t i) { hit[i] = 1; });
    CHECK(std::accumulate(hit.begin(), hit.end(), 0) == 100);
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) { if (i == 5) throw DataError("x"); }), DataError);
    CHECK(resolve_threads(3) == 3);
    CHECK(resolve_threads(0) >= 1);
}
