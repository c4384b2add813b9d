#include "catspace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace catspace::synth {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kCoreSize = kMaxCoreTokens;
constexpr int kMaxPlantAttempts = 400;

using Rng = std::mt19937_64;
using DVector = Eigen::VectorXd;

std::size_t max_subdims(const SynthConfig& c)
{
    std::size_t d = 0;
    for (const auto& [count, weight] : c.subdims_per_neuron) {
        if (weight > 0.0) d = std::max(d, count);
    }
    return d;
}

std::size_t pool_count(const SynthConfig& c) { return (c.neurons_per_layer + c.targets_per_pool - 1) / c.targets_per_pool; }

DVector random_unit(Rng& rng, std::size_t dim)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    DVector v(static_cast<Eigen::Index>(dim));
    do {
        for (auto& x : v) x = normal(rng);
    } while (v.norm() == 0.0);
    return v.normalized();
}

double cosine(const DVector& a, const DVector& b) { return a.dot(b) / (a.norm() * b.norm()); }

struct PoolLayout {
    std::size_t subdims = 0;
    std::vector<TokenId> tokens;      // the pool's 100 core-tokens
    std::vector<std::size_t> counts;  // membership count per pool token
    std::vector<std::size_t> block;   // block[c] = number of tokens with count c
    std::vector<DVector> centers;     // centers[c], c = 0 is the background
};

// Noise-free proximity of a count-c token to cluster k (k = 1..d).
double block_proximity(const PoolLayout& p, std::size_t c, std::size_t k)
{
    double sum = 0.0;
    double size = 0.0;
    for (std::size_t other = k; other <= p.subdims; ++other) {
        sum += static_cast<double>(p.block[other]) * cosine(p.centers[c], p.centers[other]);
        size += static_cast<double>(p.block[other]);
    }
    return sum / size;
}

bool strictly_monotone(const PoolLayout& p)
{
    for (std::size_t k = 1; k <= p.subdims; ++k) {
        for (std::size_t c = 0; c < p.subdims; ++c) {
            if (!(block_proximity(p, c + 1, k) > block_proximity(p, c, k) + 1e-6)) return false;
        }
    }
    return true;
}

// Centers rounded through float so the check sees exactly the stored geometry.
DVector as_stored(const DVector& v) { return v.cast<float>().cast<double>(); }

void draw_geometry(PoolLayout& p, const SynthConfig& config, Rng& rng)
{
    const std::size_t d = p.subdims;
    const DVector shared = random_unit(rng, config.dim);
    std::vector<DVector> directions;
    for (std::size_t k = 0; k < d; ++k) {
        DVector g = random_unit(rng, config.dim);
        directions.push_back(((1.0 - config.direction_coherence) * g + config.direction_coherence * shared).normalized());
    }
    p.centers.assign(d + 1, DVector());
    DVector sum = DVector::Zero(static_cast<Eigen::Index>(config.dim));
    for (std::size_t c = 1; c <= d; ++c) {
        sum += directions[c - 1];
        p.centers[c] = as_stored(sum.normalized());
    }
    // Background: orthogonal to every cluster direction.
    DVector bg = random_unit(rng, config.dim);
    std::vector<DVector> basis;
    for (const auto& u : directions) {
        DVector q = u;
        for (const auto& b : basis) q -= q.dot(b) * b;
        basis.push_back(q.normalized());
    }
    for (const auto& b : basis) bg -= bg.dot(b) * b;
    p.centers[0] = as_stored(bg.normalized());
}

PoolLayout plant_pool(std::size_t pool, const SynthConfig& config, Rng& rng)
{
    std::vector<std::size_t> choices;
    std::vector<double> weights;
    for (const auto& [count, weight] : config.subdims_per_neuron) {
        choices.push_back(count);
        weights.push_back(weight);
    }
    std::discrete_distribution<std::size_t> pick_d(weights.begin(), weights.end());
    const auto& sizes = config.cluster_size;
    std::uniform_int_distribution<std::size_t> inner(sizes.inner_min, sizes.inner_max);
    std::uniform_int_distribution<std::size_t> step(sizes.step_min, sizes.step_max);

    PoolLayout p;
    p.subdims = choices[pick_d(rng)];
    for (int attempt = 0; attempt < kMaxPlantAttempts; ++attempt) {
        if (attempt % 20 == 0) {
            p.block.assign(p.subdims + 1, 0);
            p.block[p.subdims] = inner(rng);
            for (std::size_t c = 1; c < p.subdims; ++c) p.block[c] = step(rng);
            p.block[0] = kCoreSize - std::accumulate(p.block.begin() + 1, p.block.end(), std::size_t{0});
        }
        draw_geometry(p, config, rng);
        if (strictly_monotone(p)) break;
        if (attempt + 1 == kMaxPlantAttempts)
            throw ConfigError("synth: could not plant a monotone structure for pool " + std::to_string(pool) +
                              "; widen cluster_size.inner or lower direction_coherence");
    }

    p.tokens.resize(kCoreSize);
    for (std::size_t i = 0; i < kCoreSize; ++i) p.tokens[i] = TokenId{static_cast<std::uint32_t>(pool * kCoreSize + i)};
    std::vector<std::size_t> counts;
    for (std::size_t c = 0; c <= p.subdims; ++c) counts.insert(counts.end(), p.block[c], c);
    std::shuffle(counts.begin(), counts.end(), rng);
    p.counts = std::move(counts);
    return p;
}

void add_noise(Eigen::RowVectorXf& out, const DVector& center, double noise, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, noise / std::sqrt(static_cast<double>(center.size())));
    for (Eigen::Index i = 0; i < center.size(); ++i) {
        out(i) = static_cast<float>(center(i) + (noise > 0.0 ? normal(rng) : 0.0));
    }
}

SyntheticData build(const SynthConfig& config, bool independent_activations)
{
    validate(config);
    Rng rng(config.seed);
    const std::size_t pools = pool_count(config);
    const std::size_t width = config.neurons_per_layer;
    const std::size_t filler_begin = pools * kCoreSize;

    SyntheticData out;
    Dataset& ds = out.dataset;
    ds.embeddings.data.resize(static_cast<Eigen::Index>(config.vocab_size), static_cast<Eigen::Index>(config.dim));

    std::vector<PoolLayout> layouts;
    layouts.reserve(pools);
    for (std::size_t p = 0; p < pools; ++p) layouts.push_back(plant_pool(p, config, rng));

    // Embeddings: pool tokens around their block centre, fillers anywhere.
    Eigen::RowVectorXf row(static_cast<Eigen::Index>(config.dim));
    for (std::size_t p = 0; p < pools; ++p) {
        const auto& layout = layouts[p];
        for (std::size_t i = 0; i < kCoreSize; ++i) {
            add_noise(row, layout.centers[layout.counts[i]], config.embedding_noise, rng);
            ds.embeddings.data.row(static_cast<Eigen::Index>(layout.tokens[i].value)) = row;
        }
    }
    for (std::size_t t = filler_begin; t < config.vocab_size; ++t) {
        add_noise(row, random_unit(rng, config.dim), config.embedding_noise, rng);
        ds.embeddings.data.row(static_cast<Eigen::Index>(t)) = row;
    }

    // Host every cluster on a distinct layer-0 neuron: best-fit decreasing
    // over all clusters (ties: pool, then nesting depth).
    std::vector<std::vector<std::set<TokenId>>> pool_clusters(pools);
    std::vector<std::vector<NeuronId>> pool_hosts(pools);
    struct Pending {
        std::size_t pool, depth, size;
    };
    std::vector<Pending> pending;
    for (std::size_t p = 0; p < pools; ++p) {
        const auto& layout = layouts[p];
        for (std::size_t k = 1; k <= layout.subdims; ++k) {
            std::set<TokenId> cluster;
            for (std::size_t i = 0; i < kCoreSize; ++i) {
                if (layout.counts[i] >= k) cluster.insert(layout.tokens[i]);
            }
            pending.push_back({p, k, cluster.size()});
            pool_clusters[p].push_back(std::move(cluster));
        }
        pool_hosts[p].resize(layout.subdims);
    }
    std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) { return a.size > b.size; });
    std::vector<std::size_t> spare(width, kCoreSize);
    std::vector<std::vector<TokenId>> hosted(width);
    std::vector<std::set<std::size_t>> pool_used(pools);
    for (const auto& c : pending) {
        std::size_t best = width;
        for (std::size_t h = 0; h < width; ++h) {
            if (spare[h] < c.size || pool_used[c.pool].count(h)) continue;
            if (best == width || spare[h] < spare[best]) best = h;
        }
        if (best == width)
            throw ConfigError("synth: infeasible config, layer 0 cannot host the planted clusters; "
                              "raise neurons_per_layer or shrink cluster_size");
        pool_used[c.pool].insert(best);
        spare[best] -= c.size;
        const auto& cluster = pool_clusters[c.pool][c.depth - 1];
        hosted[best].insert(hosted[best].end(), cluster.begin(), cluster.end());
        pool_hosts[c.pool][c.depth - 1] = NeuronId{0, static_cast<int>(best)};
    }

    // Layer-0 profiles: hosted clusters topped up with fillers.
    std::uniform_real_distribution<double> l0_act(0.5, 3.0);
    std::vector<std::uint32_t> fillers(config.vocab_size - filler_begin);
    std::iota(fillers.begin(), fillers.end(), static_cast<std::uint32_t>(filler_begin));
    for (std::size_t h = 0; h < width; ++h) {
        NeuronProfile profile;
        profile.neuron = {0, static_cast<int>(h)};
        for (TokenId t : hosted[h]) profile.core_tokens.push_back({t, l0_act(rng), {}});
        std::vector<std::uint32_t> pick;
        std::sample(fillers.begin(), fillers.end(), std::back_inserter(pick), kCoreSize - hosted[h].size(), rng);
        for (auto id : pick) profile.core_tokens.push_back({TokenId{id}, l0_act(rng), {}});
        sort_core_tokens(profile);
        ds.profiles_l0.emplace(static_cast<int>(h), std::move(profile));
    }

    // Layer-1 profiles and connections.
    Rng permute_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> act_noise(0.0, 1.0);
    std::uniform_real_distribution<double> planted_weight(0.5, 1.0);
    std::uniform_real_distribution<double> other_weight(-0.5, 0.45);
    out.planted.resize(width);
    for (std::size_t t = 0; t < width; ++t) {
        const std::size_t p = t / config.targets_per_pool;
        const auto& layout = layouts[p];
        const NeuronId target{1, static_cast<int>(t)};

        std::vector<double> acts(kCoreSize);
        for (std::size_t i = 0; i < kCoreSize; ++i) {
            acts[i] = config.base_activation + config.intersection_boost * static_cast<double>(layout.counts[i]);
            if (config.noise_sigma > 0.0) acts[i] += config.noise_sigma * act_noise(rng);
        }
        if (independent_activations) std::shuffle(acts.begin(), acts.end(), permute_rng);

        NeuronProfile profile;
        profile.neuron = target;
        for (std::size_t i = 0; i < kCoreSize; ++i) profile.core_tokens.push_back({layout.tokens[i], acts[i], {}});
        sort_core_tokens(profile);
        ds.profiles_l1.emplace(target.index, std::move(profile));

        std::vector<Connection> entries(width);
        std::vector<bool> is_planted(width, false);
        for (const auto& host : pool_hosts[p]) is_planted[static_cast<std::size_t>(host.index)] = true;
        for (std::size_t h = 0; h < width; ++h) {
            entries[h] = {NeuronId{0, static_cast<int>(h)}, is_planted[h] ? planted_weight(rng) : other_weight(rng)};
        }
        std::sort(entries.begin(), entries.end(), [](const Connection& a, const Connection& b) {
            if (a.weight != b.weight) return a.weight > b.weight;
            return a.precursor.index < b.precursor.index;
        });
        entries.resize(std::min(width, std::max(config.listed_connections, layout.subdims)));
        ds.connections.emplace(target.index, ConnectionWeights{target, std::move(entries)});

        PlantedNeuron& truth = out.planted[t];
        truth.target = target;
        truth.pool = p;
        truth.precursors = pool_hosts[p];
        truth.clusters = pool_clusters[p];
        for (std::size_t i = 0; i < kCoreSize; ++i) truth.membership[layout.tokens[i]] = layout.counts[i];
    }

    ds.provenance.connection_source = "synthetic";
    ds.provenance.activation_semantics = independent_activations
                                             ? "synthetic null model: planted activations permuted within each neuron"
                                             : "synthetic: base + boost * membership count + gaussian noise";
    ds.provenance.seed = config.seed;
    ds.provenance.notes.push_back("neurons_per_layer=" + std::to_string(width) + " vocab_size=" + std::to_string(config.vocab_size) +
                                  " dim=" + std::to_string(config.dim));
    validate_dataset(ds);
    seal_provenance(ds.provenance);
    return out;
}

}  // namespace

void validate(const SynthConfig& c)
{
    if (c.vocab_size < 1 || c.dim < 1 || c.neurons_per_layer < 1 || c.targets_per_pool < 1 || c.listed_connections < 1)
        throw ConfigError("synth: counts must be at least 1");
    if (c.subdims_per_neuron.empty()) throw ConfigError("synth: subdims_per_neuron is empty");
    double total = 0.0;
    for (const auto& [count, weight] : c.subdims_per_neuron) {
        if (count < 1 || count > 10) throw ConfigError("synth: sub-dimension counts must lie in [1, 10]");
        if (!(weight >= 0.0) || !std::isfinite(weight)) throw ConfigError("synth: sub-dimension weights must be finite and >= 0");
        total += weight;
    }
    if (!(total > 0.0)) throw ConfigError("synth: sub-dimension weights sum to zero");
    const auto& s = c.cluster_size;
    if (s.inner_min < 1 || s.inner_min > s.inner_max || s.step_min < 1 || s.step_min > s.step_max)
        throw ConfigError("synth: invalid cluster_size ranges");
    const std::size_t d = max_subdims(c);
    if (s.inner_max + (d - 1) * s.step_max > kCoreSize)
        throw ConfigError("synth: infeasible config, planted clusters exceed 100 core-tokens");
    if (c.dim < d + 2) throw ConfigError("synth: dim must exceed the sub-dimension count by at least 2");
    if (!(c.intersection_boost >= 0.0) || !(c.noise_sigma >= 0.0) || !(c.embedding_noise >= 0.0))
        throw ConfigError("synth: boost and noise levels must be >= 0");
    if (!(c.direction_coherence >= 0.0 && c.direction_coherence < 1.0))
        throw ConfigError("synth: direction_coherence must lie in [0, 1)");
    if (c.neurons_per_layer < d) throw ConfigError("synth: infeasible config, fewer layer-0 neurons than sub-dimensions");
    if (c.vocab_size < pool_count(c) * kCoreSize + kCoreSize)
        throw ConfigError("synth: infeasible config, vocab_size must be at least " +
                          std::to_string(pool_count(c) * kCoreSize + kCoreSize));
}

SyntheticData generate(const SynthConfig& config) { return build(config, false); }

SyntheticData null_model(const SynthConfig& config) { return build(config, true); }

SynthConfig fixture_config()
{
    SynthConfig c;
    c.seed = 7;
    c.vocab_size = 1000;
    c.neurons_per_layer = 8;
    c.subdims_per_neuron = {{3, 1.0}, {4, 1.0}};
    return c;
}

DatasetFiles write_dataset(const Dataset& ds, const fs::path& dir)
{
    fs::create_directories(dir);
    DatasetFiles files{dir / "embeddings.bin", dir / "profiles.jsonl", dir / "connections.jsonl"};
    write_embeddings(files.embeddings, ds.embeddings);
    ProfileFileMeta meta;
    meta.vocab_size = ds.embeddings.vocab_size();
    meta.activation_semantics = ds.provenance.activation_semantics;
    meta.seed = ds.provenance.seed;
    write_neuron_profiles(files.profiles, meta, {&ds.profiles_l0, &ds.profiles_l1});
    write_connections(files.connections, ds.connections);
    return files;
}

}  // namespace catspace::synth
