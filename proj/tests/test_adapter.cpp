#include "catspace/adapter.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace catspace;
using namespace catspace::adapter;
using testing::TempDir;

TEST_CASE("byte-level alphabet")
{
    CHECK(byte_level_encode(" the") == "\xC4\xA0the");  // U+0120 then "the"
    CHECK(byte_level_encode("\n") == "\xC4\x8A");       // U+010A
    CHECK(byte_level_encode("abc!~") == "abc!~");
    CHECK(byte_level_encode("\xC3\xA9") == "\xC3\x83\xC2\xA9");  // "é" bytes C3 A9 map to U+00C3 U+00A9
    CHECK(byte_level_encode(std::string(1, '\0')) == "\xC4\x80");  // U+0100
    CHECK(byte_level_encode("\xAD") == "\xC5\x83");  // soft hyphen is the last remapped byte below 0xFF, U+0143
}

TEST_CASE("activation records become profiles")
{
    TempDir dir("adapt");
    testing::spit(dir / "encoder.json", R"({"Ġthe": 5, "cat": 7, "Ġdog": 9, "!": 0})");
    const auto vocab = load_gpt2_vocabulary(dir / "encoder.json");
    CHECK(vocab.size() == 4);
    CHECK(vocab.at("\xC4\xA0the") == 5);

    // one pretty-printed neuron in the first file, two JSON lines in the second
    testing::spit(dir / "a.json", R"({
  "neuron_id": {"layer_index": 1, "neuron_index": 5},
  "most_positive_activation_records": [
    {"tokens": [" the", "cat", " the", "zzz"], "activations": [1.0, 4.0, 3.0, 9.0]},
    {"tokens": ["cat", " dog"], "activations": [2.0, 2.0]}
  ]
})");
    testing::spit(dir / "b.jsonl",
                  R"({"neuron_id":{"layer_index":0,"neuron_index":2},"most_positive_activation_records":[{"tokens":["!"],"activations":[0.5]}]})"
                  "\n"
                  R"({"neuron_id":{"layer_index":0,"neuron_index":3},"most_positive_activation_records":[]})"
                  "\n");
    AdapterSummary summary;
    const auto [l0, l1] = profiles_from_activation_records({dir / "a.json", dir / "b.jsonl"}, vocab, summary);
    CHECK(summary.files == 2);
    CHECK(summary.neurons == 3);
    CHECK(summary.occurrences == 7);
    CHECK(summary.unmapped_occurrences == 1);

    const auto& p = l1.at(5);
    REQUIRE(p.core_tokens.size() == 3);
    // means: cat 3.0, the 2.0, dog 2.0 (tie: lower id first)
    CHECK(p.core_tokens[0].token == TokenId{7});
    CHECK(p.core_tokens[0].activation == 3.0);
    CHECK(p.core_tokens[0].text == "cat");
    CHECK(p.core_tokens[1].token == TokenId{5});
    CHECK(p.core_tokens[2].token == TokenId{9});
    CHECK(l0.at(2).core_tokens.size() == 1);
    CHECK(l0.at(3).core_tokens.empty());

    AdapterSummary s2;
    const auto top1 = profiles_from_activation_records({dir / "a.json"}, vocab, s2, 1);
    CHECK(top1.second.at(5).core_tokens.size() == 1);
}

TEST_CASE("malformed activation records")
{
    TempDir dir("adbad");
    const Vocabulary vocab{{"x", 1}};
    AdapterSummary s;
    testing::spit(dir / "layer.json", R"({"neuron_id":{"layer_index":4,"neuron_index":0},"most_positive_activation_records":[]})");
    CHECK_THROWS_WITH_AS(profiles_from_activation_records({dir / "layer.json"}, vocab, s), doctest::Contains("layer 4"), DataError);
    testing::spit(dir / "len.json",
                  R"({"neuron_id":{"layer_index":1,"neuron_index":0},"most_positive_activation_records":[{"tokens":["x"],"activations":[]}]})");
    CHECK_THROWS_AS(profiles_from_activation_records({dir / "len.json"}, vocab, s), DataError);
    testing::spit(dir / "junk.jsonl", "{\"neuron_id\":\n{oops\n");
    CHECK_THROWS_AS(profiles_from_activation_records({dir / "junk.jsonl"}, vocab, s), DataError);
    CHECK_THROWS_AS(profiles_from_activation_records({dir / "absent.json"}, vocab, s), DataError);
    testing::spit(dir / "enc.json", R"({"a": -1})");
    CHECK_THROWS_AS(load_gpt2_vocabulary(dir / "enc.json"), DataError);
}
