#include "catspace/adapter.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <fstream>
#include <map>

namespace fs = std::filesystem;
using nlohmann::json;

namespace catspace::adapter {

namespace {

void append_utf8(std::string& out, std::uint32_t cp)
{
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

// GPT-2 bytes_to_unicode: printable bytes map to themselves, the rest to 256+n.
const std::array<std::uint32_t, 256>& byte_alphabet()
{
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        std::uint32_t n = 0;
        for (std::uint32_t b = 0; b < 256; ++b) {
            const bool printable = (b >= '!' && b <= '~') || (b >= 0xA1 && b <= 0xAC) || (b >= 0xAE && b <= 0xFF);
            t[b] = printable ? b : 256 + n++;
        }
        return t;
    }();
    return table;
}

struct Accumulator {
    double sum = 0.0;
    std::size_t count = 0;
    std::string text;
};

void add_neuron(const json& record, const fs::path& path, const Vocabulary& vocab, AdapterSummary& summary, std::size_t top,
                ProfileMap& l0, ProfileMap& l1)
{
    const json& id = record.at("neuron_id");
    const int layer = id.at("layer_index").get<int>();
    const int index = id.at("neuron_index").get<int>();
    if (layer != 0 && layer != 1) throw DataError(path.string() + ": layer " + std::to_string(layer) + " is outside the studied slice (0, 1)");
    ProfileMap& target = layer == 0 ? l0 : l1;
    if (target.contains(index)) throw DataError(path.string() + ": duplicate neuron L" + std::to_string(layer) + "/" + std::to_string(index));

    std::map<std::uint32_t, Accumulator> tokens;
    for (const auto& rec : record.at("most_positive_activation_records")) {
        const auto& strs = rec.at("tokens");
        const auto& acts = rec.at("activations");
        if (strs.size() != acts.size()) throw DataError(path.string() + ": tokens and activations differ in length");
        for (std::size_t i = 0; i < strs.size(); ++i) {
            ++summary.occurrences;
            const std::string text = strs[i].get<std::string>();
            const auto it = vocab.find(byte_level_encode(text));
            if (it == vocab.end()) {
                ++summary.unmapped_occurrences;
                continue;
            }
            const double a = acts[i].get<double>();
            if (!std::isfinite(a)) throw DataError(path.string() + ": non-finite activation");
            auto& acc = tokens[it->second];
            acc.sum += a;
            ++acc.count;
            acc.text = text;
        }
    }

    NeuronProfile profile;
    profile.neuron = {layer, index};
    for (const auto& [tid, acc] : tokens) profile.core_tokens.push_back({TokenId{tid}, acc.sum / static_cast<double>(acc.count), acc.text});
    sort_core_tokens(profile);
    if (profile.core_tokens.size() > top) profile.core_tokens.resize(top);
    target.emplace(index, std::move(profile));
    ++summary.neurons;
}

}  // namespace

std::string byte_level_encode(std::string_view bytes)
{
    const auto& table = byte_alphabet();
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char b : bytes) append_utf8(out, table[b]);
    return out;
}

Vocabulary load_gpt2_vocabulary(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw DataError(path.string() + ": expected an object of token -> id");
    Vocabulary vocab;
    for (const auto& [key, value] : j.items()) {
        if (!value.is_number_unsigned()) throw DataError(path.string() + ": id of '" + key + "' is not a non-negative integer");
        vocab.emplace(key, value.get<std::uint32_t>());
    }
    return vocab;
}

std::pair<ProfileMap, ProfileMap> profiles_from_activation_records(const std::vector<fs::path>& files, const Vocabulary& vocab,
                                                                  AdapterSummary& summary, std::size_t top)
{
    ProfileMap l0, l1;
    for (const auto& path : files) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open " + path.string());
        ++summary.files;
        std::string line;
        std::size_t line_no = 0;
        std::string whole;
        // A file is either one pretty-printed object or one object per line.
        std::vector<std::string> lines;
        while (std::getline(in, line)) {
            whole += line;
            whole += '\n';
            lines.push_back(line);
        }
        try {
            const json single = json::parse(whole);
            add_neuron(single, path, vocab, summary, top, l0, l1);
            continue;
        } catch (const json::parse_error&) {
        } catch (const json::exception& e) {
            throw DataError(path.string() + ": malformed activation record: " + e.what());
        }
        for (const auto& l : lines) {
            ++line_no;
            if (l.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                add_neuron(json::parse(l), path, vocab, summary, top, l0, l1);
            } catch (const json::exception& e) {
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed activation record: " + e.what());
            }
        }
    }
    return {std::move(l0), std::move(l1)};
}

}  // namespace catspace::adapter
