#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace catspace {

using Scalar = double;
using Vector = Eigen::VectorX<Scalar>;
using Matrix = Eigen::MatrixX<Scalar>;

// Embedding storage matches the on-disk f32 payload, one token per row.
using EmbeddingStorage = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Index into the vocabulary of an embedding table.
struct TokenId {
    std::uint32_t value = 0;

    constexpr TokenId() = default;
    constexpr explicit TokenId(std::uint32_t v) : value(v) {}

    friend constexpr auto operator<=>(TokenId, TokenId) = default;
};

/// An MLP neuron of the studied two-layer slice.
struct NeuronId {
    int layer = 0;
    int index = 0;

    friend constexpr auto operator<=>(const NeuronId&, const NeuronId&) = default;
};

std::string to_string(NeuronId id);

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, records, cross references).
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration or command-line usage.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace catspace
