#include "catspace/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace catspace::experiments {

unsigned resolve_threads(unsigned requested)
{
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn)
{
    const std::size_t workers = std::min<std::size_t>(resolve_threads(threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

void validate(const AnalysisParams& p)
{
    if (p.k < 1 || p.m < 1 || p.min_cluster_size < 1 || p.min_clusters < 1 || p.min_distinct_tokens < 1)
        throw ConfigError("thresholds k, m, min_cluster_size, min_clusters and min_distinct_tokens must be positive");
    if (p.k > 10) throw ConfigError("k must not exceed 10 precursors");
    if (p.d_tau < 1 || p.d_tau > 10 || p.d_pca < 1 || p.d_pca > 10) throw ConfigError("d must lie in [1, 10]");
}

std::vector<CategoricalSpace> all_spaces(const Dataset& ds, const AnalysisParams& p, OrderPolicy order)
{
    std::vector<NeuronId> targets;
    for (const auto& [index, conn] : ds.connections) {
        if (ds.profiles_l1.count(index)) targets.push_back(NeuronId{1, index});
    }
    std::vector<CategoricalSpace> spaces(targets.size());
    parallel_for(targets.size(), p.threads, [&](std::size_t i) {
        spaces[i] = build_categorical_space(build_taken_clusters(ds, targets[i], p.k), p.min_cluster_size, order);
        spaces[i].target = targets[i];
    });
    return spaces;
}

// --- Table 1 -------------------------------------------------------------------

std::vector<CategoricalSpace> filter_table1(const Dataset& ds, const AnalysisParams& p)
{
    auto spaces = all_spaces(ds, p, OrderPolicy::SizeAscending);
    std::erase_if(spaces, [&](const CategoricalSpace& s) {
        const std::size_t tokens = p.distinct == DistinctCount::Union ? s.distinct_tokens() : s.summed_sizes();
        return s.dimension() < p.min_clusters || tokens < p.min_distinct_tokens;
    });
    return spaces;
}

Table1Aggregate aggregate_contrasts(const std::vector<GroupContrast>& contrasts)
{
    if (contrasts.empty()) throw DataError("no neuron survives the Table 1 filter");
    Table1Aggregate a;
    a.n = contrasts.size();
    std::size_t positive = 0, kw_sig = 0, mwu_sig = 0;
    for (const auto& g : contrasts) {
        a.mean_alpha_min += g.alpha_min;
        a.mean_alpha_max += g.alpha_max;
        a.mean_s_min += g.s_min;
        a.mean_s_max += g.s_max;
        a.mean_delta += g.delta;
        a.mean_cliffs += g.cliffs;
        if (g.delta > 0.0) ++positive;
        if (g.kw_p < 0.05) ++kw_sig;
        if (g.mwu_p < 0.05) ++mwu_sig;
    }
    const double n = static_cast<double>(a.n);
    a.mean_alpha_min /= n;
    a.mean_alpha_max /= n;
    a.mean_s_min /= n;
    a.mean_s_max /= n;
    a.mean_delta /= n;
    a.mean_cliffs /= n;
    a.pct_delta_pos = 100.0 * static_cast<double>(positive) / n;
    a.pct_kw_sig = 100.0 * static_cast<double>(kw_sig) / n;
    a.pct_mwu_sig = 100.0 * static_cast<double>(mwu_sig) / n;
    const double observed[2] = {static_cast<double>(positive), static_cast<double>(a.n - positive)};
    const double equiprobable[2] = {0.5, 0.5};
    a.p_chi = stats::chi_square_gof(observed, equiprobable).p_value;
    return a;
}

Table1Result run_group_comparison(const Dataset& ds, const AnalysisParams& p)
{
    validate(p);
    const auto spaces = filter_table1(ds, p);
    Table1Result out;
    out.per_neuron.resize(spaces.size());
    parallel_for(spaces.size(), p.threads, [&](std::size_t i) {
        const auto pm = proximity_scores(spaces[i], ds.profile(spaces[i].target), ds.embeddings, p.self_policy);
        out.per_neuron[i] = group_contrast(pm, p.m);
    });
    out.aggregate = aggregate_contrasts(out.per_neuron);
    return out;
}

// --- mean neuron -------------------------------------------------------------

std::vector<CategoricalSpace> filter_exact_d(const Dataset& ds, std::size_t d, const AnalysisParams& p)
{
    if (d < 1) throw std::invalid_argument("filter_exact_d: d must be at least 1");
    auto spaces = all_spaces(ds, p, OrderPolicy::SizeAscending);
    std::erase_if(spaces, [&](const CategoricalSpace& s) { return s.dimension() != d; });
    return spaces;
}

Matrix MeanNeuron::proximity_matrix() const
{
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t k = 0; k < d; ++k) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r].proximity[k];
    return out;
}

std::vector<double> MeanNeuron::activation_column() const
{
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.activation);
    return out;
}

std::vector<double> MeanNeuron::proximity_column(std::size_t k) const
{
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.proximity.at(k));
    return out;
}

std::vector<double> MeanNeuron::mean_proximity_column() const
{
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.mean_proximity);
    return out;
}

ProximityMatrix ranked_proximity(const CategoricalSpace& space, const Dataset& ds, SelfPolicy self_policy)
{
    ProximityMatrix pm = proximity_scores(space, ds.profile(space.target), ds.embeddings, self_policy);
    std::sort(pm.rows.begin(), pm.rows.end(), [](const ProximityRow& a, const ProximityRow& b) {
        if (a.activation != b.activation) return a.activation < b.activation;
        return a.token > b.token;
    });
    return pm;
}

MeanNeuron build_mean_neuron(const std::vector<CategoricalSpace>& spaces, const Dataset& ds, OrderPolicy order,
                             SelfPolicy self_policy, unsigned threads)
{
    if (spaces.empty()) throw DataError("build_mean_neuron: no neurons");
    MeanNeuron mean;
    mean.d = spaces.front().dimension();
    mean.order = order;
    for (const auto& s : spaces)
        if (s.dimension() != mean.d)
            throw std::invalid_argument("build_mean_neuron: heterogeneous sub-dimension counts (" + std::to_string(mean.d) + " and " +
                                        std::to_string(s.dimension()) + ")");

    std::vector<const CategoricalSpace*> kept;
    for (const auto& s : spaces) {
        if (ds.profile(s.target).core_tokens.size() < kMeanNeuronRows)
            mean.dropped.push_back(s.target);
        else
            kept.push_back(&s);
    }
    std::sort(kept.begin(), kept.end(), [](const auto* a, const auto* b) { return a->target < b->target; });
    std::sort(mean.dropped.begin(), mean.dropped.end());
    if (kept.empty()) throw DataError("build_mean_neuron: every neuron has fewer than 100 core-tokens");

    std::vector<ProximityMatrix> ranked(kept.size());
    parallel_for(kept.size(), threads, [&](std::size_t i) {
        const CategoricalSpace ordered = build_categorical_space(kept[i]->subdims, 0, order);
        CategoricalSpace space = ordered;
        space.target = kept[i]->target;
        ranked[i] = ranked_proximity(space, ds, self_policy);
    });

    const std::size_t d = mean.d;
    mean.rows.assign(kMeanNeuronRows, MeanRow{0.0, std::vector<double>(d, 0.0), 0.0});
    std::vector<std::vector<std::size_t>> defined(kMeanNeuronRows, std::vector<std::size_t>(d, 0));
    std::vector<std::size_t> defined_mean(kMeanNeuronRows, 0);
    for (std::size_t i = 0; i < kept.size(); ++i) {
        mean.neurons.push_back(kept[i]->target);
        for (std::size_t r = 0; r < kMeanNeuronRows; ++r) {
            const ProximityRow& row = ranked[i].rows[r];
            MeanRow& out = mean.rows[r];
            out.activation += row.activation;
            for (std::size_t k = 0; k < d; ++k) {
                if (row.coords[k]) {
                    out.proximity[k] += *row.coords[k];
                    ++defined[r][k];
                }
            }
            if (!std::isnan(row.mean)) {
                out.mean_proximity += row.mean;
                ++defined_mean[r];
            }
        }
    }
    const double n = static_cast<double>(kept.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t r = 0; r < kMeanNeuronRows; ++r) {
        MeanRow& out = mean.rows[r];
        out.activation /= n;
        for (std::size_t k = 0; k < d; ++k)
            out.proximity[k] = defined[r][k] ? out.proximity[k] / static_cast<double>(defined[r][k]) : nan;
        out.mean_proximity = defined_mean[r] ? out.mean_proximity / static_cast<double>(defined_mean[r]) : nan;
    }
    return mean;
}

// --- Table 2 -------------------------------------------------------------------

TauReport ordinal_correlation(MeanNeuron mean)
{
    TauReport report;
    report.n_neurons = mean.neurons.size();
    report.d = mean.d;
    const auto activation = mean.activation_column();
    for (std::size_t k = 0; k < mean.d; ++k) {
        const auto t = stats::kendall_tau_b(activation, mean.proximity_column(k));
        report.dims.push_back({t.statistic, t.p_value});
    }
    report.mean = std::move(mean);
    return report;
}

TauReport run_ordinal_correlation(const Dataset& ds, const AnalysisParams& p)
{
    validate(p);
    const auto spaces = filter_exact_d(ds, p.d_tau, p);
    if (spaces.empty()) throw DataError("no neuron has exactly " + std::to_string(p.d_tau) + " sub-dimensions");
    return ordinal_correlation(build_mean_neuron(spaces, ds, OrderPolicy::SizeAscending, p.self_policy, p.threads));
}

// --- PCA structure -------------------------------------------------------------

PcaStructure run_pca_structure(const Dataset& ds, const AnalysisParams& p)
{
    validate(p);
    if (p.d_pca < 2) throw ConfigError("the PCA study needs d >= 2");
    const auto spaces = filter_exact_d(ds, p.d_pca, p);
    if (spaces.empty()) throw DataError("no neuron has exactly " + std::to_string(p.d_pca) + " sub-dimensions");

    PcaStructure out;
    out.d = p.d_pca;
    out.mean = build_mean_neuron(spaces, ds, OrderPolicy::SizeDescending, p.self_policy, p.threads);
    out.n_neurons = out.mean.neurons.size();
    out.result = pca::pca(out.mean.proximity_matrix());
    out.circle = pca::correlation_circle(out.result, 0, 1);

    std::vector<double> factor1;
    for (std::size_t r = 0; r < out.mean.rows.size(); ++r) {
        Projection proj{r + 1, out.mean.rows[r].activation, {}};
        for (Eigen::Index f = 0; f < out.result.factors(); ++f) proj.scores.push_back(out.result.scores(static_cast<Eigen::Index>(r), f));
        factor1.push_back(proj.scores.front());
        out.projections.push_back(std::move(proj));
    }
    const auto t1 = stats::kendall_tau_b(out.mean.activation_column(), factor1);
    out.activation_vs_factor1 = {t1.statistic, t1.p_value};
    const auto t2 = stats::kendall_tau_b(factor1, out.mean.mean_proximity_column());
    out.factor1_vs_mean_proximity = {t2.statistic, t2.p_value};

    // Per-neuron analyses for the first sample_circles contributing neurons.
    const std::size_t sample = std::min(p.sample_circles, out.mean.neurons.size());
    std::vector<std::optional<NeuronPca>> results(sample);
    std::vector<std::string> errors(sample);
    parallel_for(sample, p.threads, [&](std::size_t i) {
        const NeuronId id = out.mean.neurons[i];
        const auto it = std::find_if(spaces.begin(), spaces.end(), [&](const CategoricalSpace& s) { return s.target == id; });
        CategoricalSpace space = build_categorical_space(it->subdims, 0, OrderPolicy::SizeDescending);
        space.target = id;
        const ProximityMatrix pm = ranked_proximity(space, ds, p.self_policy);
        Matrix data(static_cast<Eigen::Index>(pm.rows.size()), static_cast<Eigen::Index>(p.d_pca));
        for (std::size_t r = 0; r < pm.rows.size(); ++r) {
            for (std::size_t k = 0; k < p.d_pca; ++k) {
                if (!pm.rows[r].coords[k]) {
                    errors[i] = to_string(id) + ": undefined proximity coordinate";
                    return;
                }
                data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = *pm.rows[r].coords[k];
            }
        }
        try {
            auto result = pca::pca(data);
            auto circle = pca::correlation_circle(result, 0, 1);
            results[i] = NeuronPca{id, std::move(result), std::move(circle)};
        } catch (const std::invalid_argument& e) {
            errors[i] = to_string(id) + ": " + e.what();
        }
    });
    for (std::size_t i = 0; i < sample; ++i) {
        if (results[i])
            out.per_neuron.push_back(std::move(*results[i]));
        else
            out.skipped.push_back(errors[i]);
    }
    return out;
}

}  // namespace catspace::experiments
