#pragma once

// Synthetic datasets with planted categorical sub-dimensions.
//
// Layer-1 neurons come in pools that share one set of 100 core-tokens and one
// planted structure (`targets_per_pool` neurons per pool). A pool with d
// sub-dimensions has nested taken-clusters C_1 ⊃ C_2 ⊃ ... ⊃ C_d, so a token's
// membership count c places it in exactly C_1..C_c. Each cluster is hosted by
// a distinct layer-0 precursor whose core-tokens contain the cluster and
// otherwise only filler tokens that belong to no layer-1 neuron.
//
// Geometry: cluster directions u_k are uniform on the unit sphere (optionally
// pulled toward a shared pool direction); a token with count c sits at
// normalize(u_1 + ... + u_c) plus isotropic noise, and tokens in no cluster sit
// on a background direction orthogonal to the pool's cluster directions.
// Layouts are redrawn until every sub-dimension's proximity strictly
// increases with membership count in the noise-free geometry.

#include "catspace/ingest.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <vector>

namespace catspace::synth {

struct ClusterSizes {
    // Innermost block: tokens belonging to every sub-dimension.
    std::size_t inner_min = 24;
    std::size_t inner_max = 32;
    // Each outer shell adds this many tokens to the next cluster out.
    std::size_t step_min = 4;
    std::size_t step_max = 8;
};

struct SynthConfig {
    std::uint64_t seed = 7;
    std::size_t vocab_size = 30000;
    std::size_t dim = 64;
    std::size_t neurons_per_layer = 512;
    // Relative weights of the number of planted sub-dimensions per neuron.
    std::map<std::size_t, double> subdims_per_neuron{{2, 1.0}, {3, 3.0}, {4, 3.0}, {5, 1.0}};
    ClusterSizes cluster_size;
    double base_activation = 1.0;
    double intersection_boost = 1.0;
    double noise_sigma = 1.0;
    // Expected norm of the isotropic embedding noise added to every token.
    double embedding_noise = 0.1;
    // 0: independent cluster directions; towards 1: directions share one axis.
    double direction_coherence = 0.0;
    std::size_t targets_per_pool = 2;
    std::size_t listed_connections = 10;
};

/// Ground truth for one layer-1 neuron.
struct PlantedNeuron {
    NeuronId target;
    std::size_t pool = 0;
    // Hosting precursor of each nested cluster, outermost (largest) first.
    std::vector<NeuronId> precursors;
    std::vector<std::set<TokenId>> clusters;
    std::map<TokenId, std::size_t> membership;  // core-token -> count
};

struct SyntheticData {
    Dataset dataset;
    std::vector<PlantedNeuron> planted;  // indexed by layer-1 neuron index
};

/// Validates a configuration, throwing ConfigError when it is infeasible.
void validate(const SynthConfig& config);

SyntheticData generate(const SynthConfig& config);

/// Same structure as generate(), activations permuted within each neuron so
/// they are independent of cluster membership.
SyntheticData null_model(const SynthConfig& config);

/// Small configuration used for the test fixture corpus (seed 7, 8 neurons per layer).
SynthConfig fixture_config();

struct DatasetFiles {
    std::filesystem::path embeddings;
    std::filesystem::path profiles;
    std::filesystem::path connections;
};

/// Writes embeddings.bin, profiles.jsonl and connections.jsonl into `dir`.
DatasetFiles write_dataset(const Dataset& ds, const std::filesystem::path& dir);

}  // namespace catspace::synth
