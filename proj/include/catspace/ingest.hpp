#pragma once

// Loading embeddings, neuron profiles, weights and connections into an
// immutable Dataset snapshot.
//
// Binary matrix files (embeddings and MLP weights) share one layout:
//   bytes 0..11   magic "CATSPACE-BIN"
//   bytes 12..15  format version, uint32 little-endian
//   header line   compact JSON object terminated by '\n'
//                 {"dim","dtype":"f32","endianness":"little","kind","vocab_size"} for embeddings,
//                 {"cols","dtype","endianness","kind","rows"} for weight matrices
//   payload       row-major little-endian IEEE-754 float32
//
// Profile files are JSON lines, one neuron per line:
//   {"layer":1,"neuron":5,"tokens":[{"token_id":17,"token_str":"x","act":2.5},...]}
// An optional first line {"meta":{"vocab_size":...,"activation_semantics":...,"seed":...}}
// declares the vocabulary and how activations were aggregated upstream.
//
// Connection files are JSON lines:
//   {"target":5,"precursors":[{"index":12,"weight":0.8},...]}

#include "catspace/core.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace catspace {

inline constexpr char kBinaryMagic[12] = {'C', 'A', 'T', 'S', 'P', 'A', 'C', 'E', '-', 'B', 'I', 'N'};
inline constexpr std::uint32_t kBinaryVersion = 1;
inline constexpr std::size_t kMaxCoreTokens = 100;

struct EmbeddingTable {
    EmbeddingStorage data;  // vocab_size x dim

    std::size_t vocab_size() const { return static_cast<std::size_t>(data.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(data.cols()); }
    auto row(TokenId t) const { return data.row(static_cast<Eigen::Index>(t.value)); }
    bool contains(TokenId t) const { return t.value < vocab_size(); }
};

struct CoreToken {
    TokenId token;
    double activation = 0.0;
    std::string text;  // optional token string, may be empty
};

/// A neuron's core-tokens, sorted by activation descending (ties: token id ascending).
struct NeuronProfile {
    NeuronId neuron;
    std::vector<CoreToken> core_tokens;
};

using ProfileMap = std::map<int, NeuronProfile>;

struct WeightMatrices {
    Matrix proj0;  // width0 x dim, layer-0 output projection, one row per neuron
    Matrix fc1;    // dim x width1, layer-1 input weights, one column per neuron
};

struct Connection {
    NeuronId precursor;
    double weight = 0.0;
};

/// Precursors of a layer-1 neuron sorted by weight descending (ties: index ascending).
struct ConnectionWeights {
    NeuronId target;
    std::vector<Connection> entries;
};

using ConnectionMap = std::map<int, ConnectionWeights>;

enum class WeightMode { Signed, Absolute };

struct SourceFile {
    std::string role;
    std::string path;
    std::string sha256;
};

struct Provenance {
    std::vector<SourceFile> sources;
    std::string connection_source;      // "precomputed", "virtual-weights" or "synthetic"
    std::string activation_semantics;   // as declared by the profile source
    std::optional<std::uint64_t> seed;  // generation seed for synthetic data
    std::vector<std::string> notes;
    std::string checksum;               // sha256 over the fields above
};

struct Dataset {
    EmbeddingTable embeddings;
    ProfileMap profiles_l0;
    ProfileMap profiles_l1;
    ConnectionMap connections;
    Provenance provenance;

    const NeuronProfile& profile(NeuronId id) const;
    const ProfileMap& layer(int layer) const;
};

// --- binary matrices -------------------------------------------------------

struct MatrixFile {
    std::string kind;
    EmbeddingStorage data;
};

MatrixFile read_matrix_file(const std::filesystem::path& path);
void write_matrix_file(const std::filesystem::path& path, const std::string& kind, const EmbeddingStorage& data);

EmbeddingTable load_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);

WeightMatrices load_weights(const std::filesystem::path& proj0, const std::filesystem::path& fc1);

// --- profiles ------------------------------------------------------------------

struct ProfileFileMeta {
    std::optional<std::size_t> vocab_size;
    std::string activation_semantics;
    std::optional<std::uint64_t> seed;  // generation seed of synthetic data
};

ProfileFileMeta read_profile_meta(const std::filesystem::path& path);

/// Profiles of one layer. Token ids are checked against the declared vocabulary
/// (file meta line) and against `vocab_limit` when given.
ProfileMap load_neuron_profiles(const std::filesystem::path& path, int layer,
                                std::optional<std::size_t> vocab_limit = std::nullopt);

void write_neuron_profiles(const std::filesystem::path& path, const ProfileFileMeta& meta,
                           const std::vector<const ProfileMap*>& layers);

/// Restore the profile ordering invariant: activation descending, token id ascending.
void sort_core_tokens(NeuronProfile& profile);

// --- connections -------------------------------------------------------------

/// (i, j) = proj0.row(i) . fc1.col(j), the residual-stream path weight.
Matrix compute_virtual_weights(const WeightMatrices& w);

ConnectionWeights top_k_precursors(const Matrix& virtual_weights, NeuronId target, std::size_t k,
                                   WeightMode mode = WeightMode::Signed);

ConnectionMap load_connections(const std::filesystem::path& path);
void write_connections(const std::filesystem::path& path, const ConnectionMap& connections);

// --- dataset -------------------------------------------------------------------

struct DatasetConfig {
    std::filesystem::path embeddings;
    std::filesystem::path profiles;
    std::filesystem::path connections;
    std::filesystem::path proj0;
    std::filesystem::path fc1;
    std::size_t k = 10;
    WeightMode weight_mode = WeightMode::Signed;
};

Dataset load_dataset(const DatasetConfig& config);

/// Check cross references between profiles, connections and embeddings.
void validate_dataset(const Dataset& ds);

/// Recompute provenance.checksum from the other provenance fields.
void seal_provenance(Provenance& p);

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(std::string_view bytes);

}  // namespace catspace
