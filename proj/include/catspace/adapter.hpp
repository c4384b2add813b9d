#pragma once

// Conversion of the public neuron activation-records release into the
// canonical profile format.
//
// A source file holds one neuron as a JSON object (or several, one per line):
//   {"neuron_id":{"layer_index":1,"neuron_index":5},
//    "most_positive_activation_records":[{"tokens":[" the",...],"activations":[0.1,...]},...], ...}
// Tokens are decoded strings; they are mapped back to vocabulary ids through
// the GPT-2 byte-level alphabet and an encoder.json vocabulary.

#include "catspace/ingest.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace catspace::adapter {

using Vocabulary = std::unordered_map<std::string, std::uint32_t>;

/// encoder.json: {"token": id, ...}
Vocabulary load_gpt2_vocabulary(const std::filesystem::path& path);

/// Maps raw UTF-8 bytes to the printable byte-level alphabet used as vocabulary keys.
std::string byte_level_encode(std::string_view bytes);

struct AdapterSummary {
    std::size_t files = 0;
    std::size_t neurons = 0;
    std::size_t occurrences = 0;
    std::size_t unmapped_occurrences = 0;  // token strings absent from the vocabulary
};

inline constexpr const char* kRecordsSemantics =
    "mean activation of each token over its occurrences in most_positive_activation_records; top 100 tokens by that mean";

/// Core-tokens per neuron: mean activation of each distinct token, top `top` by mean
/// (ties: token id ascending). Returns profiles of layers 0 and 1.
std::pair<ProfileMap, ProfileMap> profiles_from_activation_records(const std::vector<std::filesystem::path>& files,
                                                                  const Vocabulary& vocab, AdapterSummary& summary,
                                                                  std::size_t top = kMaxCoreTokens);

}  // namespace catspace::adapter
