#include "catspace/ingest.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>

namespace catspace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(NeuronId id) { return "L" + std::to_string(id.layer) + "/" + std::to_string(id.index); }

const ProfileMap& Dataset::layer(int l) const
{
    if (l == 0) return profiles_l0;
    if (l == 1) return profiles_l1;
    throw std::out_of_range("layer must be 0 or 1, got " + std::to_string(l));
}

const NeuronProfile& Dataset::profile(NeuronId id) const
{
    const auto& profiles = layer(id.layer);
    auto it = profiles.find(id.index);
    if (it == profiles.end()) throw std::out_of_range("unknown neuron " + to_string(id));
    return it->second;
}

// --- hashing -----------------------------------------------------------------

namespace {

struct DigestContext {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};

    DigestContext()
    {
        if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256: init failed");
    }
    void update(const void* data, std::size_t size)
    {
        if (EVP_DigestUpdate(ctx.get(), data, size) != 1) throw Error("sha256: update failed");
    }
    std::string hex()
    {
        unsigned char digest[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) throw Error("sha256: final failed");
        std::ostringstream out;
        for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
        return out.str();
    }
};

}  // namespace

std::string sha256_bytes(std::string_view bytes)
{
    DigestContext d;
    d.update(bytes.data(), bytes.size());
    return d.hex();
}

std::string sha256_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    DigestContext d;
    std::vector<char> buffer(1 << 16);
    while (in) {
        in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        d.update(buffer.data(), static_cast<std::size_t>(in.gcount()));
    }
    return d.hex();
}

void seal_provenance(Provenance& p)
{
    // Paths are excluded so that relocated copies of the same inputs agree.
    json j;
    j["sources"] = json::array();
    for (const auto& s : p.sources) j["sources"].push_back({{"role", s.role}, {"sha256", s.sha256}});
    j["connection_source"] = p.connection_source;
    j["activation_semantics"] = p.activation_semantics;
    j["seed"] = p.seed ? json(*p.seed) : json(nullptr);
    j["notes"] = p.notes;
    p.checksum = sha256_bytes(j.dump());
}

// --- binary matrices -------------------------------------------------------

namespace {

std::size_t require_count(const json& header, const char* key, const fs::path& path)
{
    if (!header.contains(key) || !header[key].is_number_unsigned())
        throw DataError(path.string() + ": header field '" + key + "' missing or not a non-negative integer");
    return header[key].get<std::size_t>();
}

}  // namespace

MatrixFile read_matrix_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());

    char magic[sizeof(kBinaryMagic)];
    std::uint32_t version = 0;
    in.read(magic, sizeof(magic));
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || std::memcmp(magic, kBinaryMagic, sizeof(magic)) != 0)
        throw DataError(path.string() + ": malformed header (bad magic)");
    if (version != kBinaryVersion)
        throw DataError(path.string() + ": unsupported format version " + std::to_string(version));

    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": malformed header (missing header line)");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": malformed header line: " + e.what());
    }
    if (!header.is_object()) throw DataError(path.string() + ": malformed header line");
    if (header.value("dtype", "") != "f32") throw DataError(path.string() + ": unsupported dtype");
    if (header.value("endianness", "") != "little") throw DataError(path.string() + ": unsupported endianness");

    MatrixFile out;
    out.kind = header.value("kind", "");
    std::size_t rows = 0, cols = 0;
    if (out.kind == "embeddings") {
        rows = require_count(header, "vocab_size", path);
        cols = require_count(header, "dim", path);
    } else {
        rows = require_count(header, "rows", path);
        cols = require_count(header, "cols", path);
    }

    const auto payload_start = static_cast<std::uintmax_t>(in.tellg());
    const auto file_size = fs::file_size(path);
    const std::uintmax_t expected = static_cast<std::uintmax_t>(rows) * cols * sizeof(float);
    if (file_size - payload_start != expected) {
        throw DataError(path.string() + ": size mismatch, header declares " + std::to_string(rows) + "x" +
                        std::to_string(cols) + " (" + std::to_string(expected) + " bytes) but payload has " +
                        std::to_string(file_size - payload_start) + " bytes");
    }
    out.data.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(out.data.data()), static_cast<std::streamsize>(expected));
    if (!in) throw DataError(path.string() + ": truncated payload");
    if (!out.data.allFinite()) throw DataError(path.string() + ": non-finite values in payload");
    return out;
}

void write_matrix_file(const fs::path& path, const std::string& kind, const EmbeddingStorage& data)
{
    json header;
    header["kind"] = kind;
    header["dtype"] = "f32";
    header["endianness"] = "little";
    if (kind == "embeddings") {
        header["vocab_size"] = data.rows();
        header["dim"] = data.cols();
    } else {
        header["rows"] = data.rows();
        header["cols"] = data.cols();
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(kBinaryMagic, sizeof(kBinaryMagic));
    const std::uint32_t version = kBinaryVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::string line = header.dump() + "\n";
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!out) throw DataError("failed writing " + path.string());
}

EmbeddingTable load_embeddings(const fs::path& path)
{
    MatrixFile file = read_matrix_file(path);
    if (file.kind != "embeddings") throw DataError(path.string() + ": expected kind 'embeddings', found '" + file.kind + "'");
    if (file.data.rows() < 1 || file.data.cols() < 1) throw DataError(path.string() + ": empty embedding table");
    return EmbeddingTable{std::move(file.data)};
}

void write_embeddings(const fs::path& path, const EmbeddingTable& table) { write_matrix_file(path, "embeddings", table.data); }

WeightMatrices load_weights(const fs::path& proj0, const fs::path& fc1)
{
    const MatrixFile a = read_matrix_file(proj0);
    const MatrixFile b = read_matrix_file(fc1);
    WeightMatrices w{a.data.cast<double>(), b.data.cast<double>()};
    if (w.proj0.cols() != w.fc1.rows()) {
        throw DataError("weight dimension mismatch: proj0 is " + std::to_string(w.proj0.rows()) + "x" +
                        std::to_string(w.proj0.cols()) + ", fc1 is " + std::to_string(w.fc1.rows()) + "x" +
                        std::to_string(w.fc1.cols()));
    }
    return w;
}

// --- profiles ------------------------------------------------------------------

void sort_core_tokens(NeuronProfile& profile)
{
    std::sort(profile.core_tokens.begin(), profile.core_tokens.end(), [](const CoreToken& a, const CoreToken& b) {
        if (a.activation != b.activation) return a.activation > b.activation;
        return a.token < b.token;
    });
}

namespace {

std::string where(const fs::path& path, std::size_t line) { return path.string() + ":" + std::to_string(line) + ": "; }

template <typename Fn>
void for_each_json_line(const fs::path& path, Fn&& fn)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(where(path, line_no) + "malformed record: " + e.what());
        }
        if (!record.is_object()) throw DataError(where(path, line_no) + "record is not an object");
        try {
            fn(record, line_no);
        } catch (const json::exception& e) {
            throw DataError(where(path, line_no) + e.what());
        }
    }
}

}  // namespace

ProfileFileMeta read_profile_meta(const fs::path& path)
{
    ProfileFileMeta meta;
    for_each_json_line(path, [&](const json& record, std::size_t) {
        if (!record.contains("meta")) return;
        const json& m = record["meta"];
        if (m.contains("vocab_size")) meta.vocab_size = m["vocab_size"].get<std::size_t>();
        meta.activation_semantics = m.value("activation_semantics", "");
        if (m.contains("seed") && m["seed"].is_number_unsigned()) meta.seed = m["seed"].get<std::uint64_t>();
    });
    return meta;
}

ProfileMap load_neuron_profiles(const fs::path& path, int layer, std::optional<std::size_t> vocab_limit)
{
    if (layer != 0 && layer != 1) throw ConfigError("profile layer must be 0 or 1");
    ProfileMap profiles;
    std::optional<std::size_t> declared_vocab;
    for_each_json_line(path, [&](const json& record, std::size_t line_no) {
        if (record.contains("meta")) {
            if (record["meta"].contains("vocab_size")) declared_vocab = record["meta"]["vocab_size"].get<std::size_t>();
            return;
        }
        const int record_layer = record.at("layer").get<int>();
        if (record_layer != 0 && record_layer != 1) throw DataError(where(path, line_no) + "layer must be 0 or 1");
        if (record_layer != layer) return;
        const int index = record.at("neuron").get<int>();
        if (index < 0) throw DataError(where(path, line_no) + "negative neuron index");
        if (profiles.contains(index))
            throw DataError(where(path, line_no) + "duplicate neuron index " + std::to_string(index));

        const json& tokens = record.at("tokens");
        if (!tokens.is_array()) throw DataError(where(path, line_no) + "'tokens' must be an array");
        if (tokens.size() > kMaxCoreTokens)
            throw DataError(where(path, line_no) + "neuron " + std::to_string(index) + " has " +
                            std::to_string(tokens.size()) + " core-tokens (max 100)");

        NeuronProfile profile;
        profile.neuron = {layer, index};
        std::set<std::uint32_t> seen;
        for (const json& t : tokens) {
            const auto raw_id = t.at("token_id").get<std::int64_t>();
            if (raw_id < 0) throw DataError(where(path, line_no) + "negative token id");
            const auto id = static_cast<std::uint32_t>(raw_id);
            const auto limit = vocab_limit ? vocab_limit : declared_vocab;
            if (limit && id >= *limit)
                throw DataError(where(path, line_no) + "token id " + std::to_string(id) + " outside vocabulary of size " +
                                std::to_string(*limit));
            if (!seen.insert(id).second)
                throw DataError(where(path, line_no) + "duplicate token id " + std::to_string(id) + " in neuron " +
                                std::to_string(index));
            const double act = t.at("act").get<double>();
            if (!std::isfinite(act)) throw DataError(where(path, line_no) + "non-finite activation");
            profile.core_tokens.push_back({TokenId{id}, act, t.value("token_str", "")});
        }
        sort_core_tokens(profile);
        profiles.emplace(index, std::move(profile));
    });
    return profiles;
}

void write_neuron_profiles(const fs::path& path, const ProfileFileMeta& meta, const std::vector<const ProfileMap*>& layers)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    json m;
    m["activation_semantics"] = meta.activation_semantics;
    if (meta.vocab_size) m["vocab_size"] = *meta.vocab_size;
    if (meta.seed) m["seed"] = *meta.seed;
    out << json{{"meta", m}}.dump() << '\n';
    for (const ProfileMap* layer : layers) {
        for (const auto& [index, profile] : *layer) {
            json record;
            record["layer"] = profile.neuron.layer;
            record["neuron"] = index;
            json tokens = json::array();
            for (const auto& t : profile.core_tokens) {
                json entry{{"token_id", t.token.value}, {"act", t.activation}};
                if (!t.text.empty()) entry["token_str"] = t.text;
                tokens.push_back(std::move(entry));
            }
            record["tokens"] = std::move(tokens);
            out << record.dump() << '\n';
        }
    }
    if (!out) throw DataError("failed writing " + path.string());
}

// --- connections -------------------------------------------------------------

Matrix compute_virtual_weights(const WeightMatrices& w)
{
    if (w.proj0.cols() != w.fc1.rows())
        throw std::invalid_argument("compute_virtual_weights: inner dimensions differ (" + std::to_string(w.proj0.cols()) +
                                    " vs " + std::to_string(w.fc1.rows()) + ")");
    return w.proj0 * w.fc1;
}

namespace {

bool ranks_before(const Connection& a, const Connection& b, WeightMode mode)
{
    const double ka = mode == WeightMode::Absolute ? std::abs(a.weight) : a.weight;
    const double kb = mode == WeightMode::Absolute ? std::abs(b.weight) : b.weight;
    if (ka != kb) return ka > kb;
    return a.precursor.index < b.precursor.index;
}

bool is_ranked(const std::vector<Connection>& entries, WeightMode mode)
{
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (ranks_before(entries[i], entries[i - 1], mode)) return false;
    }
    return true;
}

}  // namespace

ConnectionWeights top_k_precursors(const Matrix& virtual_weights, NeuronId target, std::size_t k, WeightMode mode)
{
    if (target.layer != 1) throw std::invalid_argument("top_k_precursors: target must be a layer-1 neuron");
    if (k == 0) throw ConfigError("top_k_precursors: k must be at least 1");
    const auto width0 = static_cast<std::size_t>(virtual_weights.rows());
    if (k > width0) throw ConfigError("top_k_precursors: k=" + std::to_string(k) + " exceeds layer-0 width " + std::to_string(width0));
    if (target.index < 0 || target.index >= virtual_weights.cols())
        throw std::out_of_range("top_k_precursors: target index out of range");

    std::vector<Connection> all(width0);
    for (std::size_t i = 0; i < width0; ++i) {
        all[i] = {NeuronId{0, static_cast<int>(i)}, virtual_weights(static_cast<Eigen::Index>(i), target.index)};
    }
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                      [mode](const Connection& a, const Connection& b) { return ranks_before(a, b, mode); });
    all.resize(k);
    return ConnectionWeights{target, std::move(all)};
}

ConnectionMap load_connections(const fs::path& path)
{
    ConnectionMap connections;
    for_each_json_line(path, [&](const json& record, std::size_t line_no) {
        const int target = record.at("target").get<int>();
        if (connections.contains(target)) throw DataError(where(path, line_no) + "duplicate target " + std::to_string(target));
        ConnectionWeights cw;
        cw.target = {1, target};
        std::set<int> seen;
        for (const json& p : record.at("precursors")) {
            const int index = p.at("index").get<int>();
            const double weight = p.at("weight").get<double>();
            if (!std::isfinite(weight)) throw DataError(where(path, line_no) + "non-finite weight");
            if (!seen.insert(index).second) throw DataError(where(path, line_no) + "duplicate precursor " + std::to_string(index));
            cw.entries.push_back({NeuronId{0, index}, weight});
        }
        if (!is_ranked(cw.entries, WeightMode::Signed) && !is_ranked(cw.entries, WeightMode::Absolute))
            throw DataError(where(path, line_no) + "precursors of target " + std::to_string(target) + " are not sorted by weight");
        connections.emplace(target, std::move(cw));
    });
    return connections;
}

void write_connections(const fs::path& path, const ConnectionMap& connections)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& [target, cw] : connections) {
        json precursors = json::array();
        for (const auto& c : cw.entries) precursors.push_back({{"index", c.precursor.index}, {"weight", c.weight}});
        out << json{{"target", target}, {"precursors", std::move(precursors)}}.dump() << '\n';
    }
    if (!out) throw DataError("failed writing " + path.string());
}

// --- dataset -------------------------------------------------------------------

void validate_dataset(const Dataset& ds)
{
    const std::size_t vocab = ds.embeddings.vocab_size();
    for (const ProfileMap* layer : {&ds.profiles_l0, &ds.profiles_l1}) {
        for (const auto& [index, profile] : *layer) {
            for (const auto& t : profile.core_tokens) {
                if (t.token.value >= vocab)
                    throw DataError("neuron " + to_string(profile.neuron) + " references token " + std::to_string(t.token.value) +
                                    " outside the embedding vocabulary (" + std::to_string(vocab) + ")");
            }
        }
    }
    for (const auto& [target, cw] : ds.connections) {
        if (!ds.profiles_l1.contains(target))
            throw DataError("connections reference layer-1 neuron " + std::to_string(target) + " without a profile");
        for (const auto& c : cw.entries) {
            if (!ds.profiles_l0.contains(c.precursor.index))
                throw DataError("connections of L1/" + std::to_string(target) + " reference layer-0 neuron " +
                                std::to_string(c.precursor.index) + " without a profile");
        }
    }
}

Dataset load_dataset(const DatasetConfig& config)
{
    if (config.embeddings.empty()) throw ConfigError("dataset configuration is missing the embeddings path");
    if (config.profiles.empty()) throw ConfigError("dataset configuration is missing the profiles path");
    const bool have_connections = !config.connections.empty();
    const bool have_weights = !config.proj0.empty() && !config.fc1.empty();
    if (!have_connections && !have_weights)
        throw ConfigError("dataset configuration needs either a connections file or both weight files");

    Dataset ds;
    ds.embeddings = load_embeddings(config.embeddings);
    ds.provenance.sources.push_back({"embeddings", config.embeddings.string(), sha256_file(config.embeddings)});

    const ProfileFileMeta meta = read_profile_meta(config.profiles);
    ds.profiles_l0 = load_neuron_profiles(config.profiles, 0, ds.embeddings.vocab_size());
    ds.profiles_l1 = load_neuron_profiles(config.profiles, 1, ds.embeddings.vocab_size());
    ds.provenance.sources.push_back({"profiles", config.profiles.string(), sha256_file(config.profiles)});
    ds.provenance.activation_semantics = meta.activation_semantics.empty() ? "unspecified" : meta.activation_semantics;
    ds.provenance.seed = meta.seed;

    if (have_connections) {
        ds.connections = load_connections(config.connections);
        ds.provenance.sources.push_back({"connections", config.connections.string(), sha256_file(config.connections)});
        ds.provenance.connection_source = "precomputed";
        if (have_weights) ds.provenance.notes.push_back("weight files ignored: precomputed connections take precedence");
    } else {
        const WeightMatrices w = load_weights(config.proj0, config.fc1);
        ds.provenance.sources.push_back({"proj0", config.proj0.string(), sha256_file(config.proj0)});
        ds.provenance.sources.push_back({"fc1", config.fc1.string(), sha256_file(config.fc1)});
        const Matrix vw = compute_virtual_weights(w);
        for (const auto& [index, profile] : ds.profiles_l1) {
            if (index >= vw.cols())
                throw DataError("layer-1 neuron " + std::to_string(index) + " exceeds fc1 width " + std::to_string(vw.cols()));
            ds.connections.emplace(index, top_k_precursors(vw, {1, index}, config.k, config.weight_mode));
        }
        ds.provenance.connection_source = "virtual-weights";
        ds.provenance.notes.push_back(std::string("top-") + std::to_string(config.k) + " precursors by " +
                                      (config.weight_mode == WeightMode::Absolute ? "absolute" : "signed") + " virtual weight");
    }

    validate_dataset(ds);
    seal_provenance(ds.provenance);
    return ds;
}

}  // namespace catspace
