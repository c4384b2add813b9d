#include "catspace/config.hpp"
#include "catspace/report.hpp"
#include "catspace/synth.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace catspace;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

RunConfig fixture_run(const TempDir& dir)
{
    synth::write_dataset(testing::fixture().dataset, dir / "data");
    RunConfig c;
    c.data = dataset_in_dir(dir / "data");
    c.out_dir = dir / "report";
    return c;
}

}  // namespace

TEST_CASE("table 1 document")
{
    const auto r = experiments::run_group_comparison(testing::fixture().dataset);
    const auto j = report::table1_json(r, {});
    CHECK(j.at("schema_version") == report::kSchemaVersion);
    const auto& f = j.at("fields");
    CHECK(f.size() == 10);
    for (const char* key : {"n", "mean_alpha_min", "mean_alpha_max", "mean_sigma_min", "mean_sigma_max", "mean_delta",
                            "pct_delta_pos", "p_chi_delta_pos", "pct_kw_sig", "mean_delta_c"})
        CHECK(f.contains(key));
    CHECK(f.at("n") == 8);
    CHECK(f.at("mean_delta").get<double>() == r.aggregate.mean_delta);
    CHECK(j.at("per_neuron").size() == 8);
    CHECK(j.at("supplementary").contains("pct_mwu_sig"));
}

TEST_CASE("non-finite values serialize as null")
{
    ProximityMatrix pm{{1, 0}, SelfPolicy::Exclude, {{TokenId{3}, 1.0, {std::nullopt}, std::numeric_limits<double>::quiet_NaN()}}};
    const auto j = report::to_json(pm);
    const auto text = j.dump();
    CHECK(text.find("NaN") == std::string::npos);
    CHECK(text.find("null") != std::string::npos);
}

TEST_CASE("report emission is deterministic")
{
    TempDir dir("rep");
    RunConfig c = fixture_run(dir);
    const auto m1 = run_and_emit(c, 1);
    CHECK(m1.files.size() == 6);
    for (const auto& f : m1.files) {
        const std::string bytes = testing::slurp(c.out_dir / f.path);
        CHECK(sha256_bytes(bytes) == f.sha256);
        CHECK(bytes.size() == f.bytes);
        if (f.path.ends_with(".json")) CHECK(nlohmann::json::parse(bytes).at("schema_version") == report::kSchemaVersion);
        if (f.path.ends_with(".svg")) CHECK(bytes.rfind("<svg", 0) == 0);
    }
    for (std::size_t i = 1; i < m1.files.size(); ++i) CHECK(m1.files[i - 1].path < m1.files[i].path);
    const std::string manifest1 = testing::slurp(c.out_dir / "manifest.json");

    // re-run from the echoed runconfig, different thread count
    RunConfig echoed = load_run_config(c.out_dir / "runconfig.json");
    CHECK(echoed.seed == std::optional<std::uint64_t>(7));
    echoed.out_dir = dir / "again";
    const auto m2 = run_and_emit(echoed, 4);
    CHECK(testing::slurp(echoed.out_dir / "manifest.json") == manifest1);
    CHECK(testing::slurp(echoed.out_dir / "runconfig.json") != "");
    const auto back = report::read_manifest(echoed.out_dir / "manifest.json");
    REQUIRE(back.files.size() == m2.files.size());
    CHECK(back.dataset_checksum == m1.dataset_checksum);

    // the pca document carries one mean circle plus the per-neuron sample
    const auto pca = report::read_json_file(c.out_dir / "pca.json");
    CHECK(pca.at("circles").size() == 1 + pca.at("per_neuron").size());
}

TEST_CASE("pipeline selection controls the file set")
{
    TempDir dir("sel");
    RunConfig c = fixture_run(dir);
    c.pipeline = Pipeline::Table1;
    CHECK(run_and_emit(c).files.size() == 1);
    c.pipeline = Pipeline::Tau;
    c.out_dir = dir / "tau";
    const auto m = run_and_emit(c);
    REQUIRE(m.files.size() == 2);
    CHECK(m.files[0].path == "plots/graph1.svg");
    CHECK(m.files[1].path == "table2.json");
}

TEST_CASE("run configuration round trip")
{
    RunConfig c;
    c.data = dataset_in_dir("/data/x");
    c.data.weight_mode = WeightMode::Absolute;
    c.pipeline = Pipeline::Pca;
    c.params.k = 8;
    c.params.m = 5;
    c.params.self_policy = SelfPolicy::Exclude;
    c.params.distinct = experiments::DistinctCount::SummedSizes;
    c.params.d_pca = 5;
    c.seed = 123;
    c.out_dir = "/tmp/out";
    c.port = 9000;
    const auto j = to_json(c);
    const RunConfig back = run_config_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.data.k == 8);
    CHECK(back.params.self_policy == SelfPolicy::Exclude);

    auto bad = j;
    bad["pipeline"] = "everything";
    CHECK_THROWS_AS(run_config_from_json(bad), ConfigError);
    bad = j;
    bad["params"]["k"] = "ten";
    CHECK_THROWS_AS(run_config_from_json(bad), ConfigError);
    bad = j;
    bad["params"]["d_tau"] = 11;
    CHECK_THROWS_AS(run_config_from_json(bad), ConfigError);
    bad = j;
    bad["port"] = 0;
    CHECK_THROWS_AS(run_config_from_json(bad), ConfigError);
    bad = j;
    bad.erase("data");
    CHECK_THROWS_AS(run_config_from_json(bad), ConfigError);

    TempDir dir("cfg");
    testing::spit(dir / "broken.json", "{");
    CHECK_THROWS_AS(load_run_config(dir / "broken.json"), ConfigError);
    CHECK(parse_pipeline("tau") == Pipeline::Tau);
}

TEST_CASE("data directory layout")
{
    TempDir dir("layout");
    auto d = dataset_in_dir(dir.path());
    CHECK(d.embeddings == dir / "embeddings.bin");
    CHECK(d.profiles == dir / "profiles.jsonl");
    testing::spit(dir / "connections.jsonl", "");
    d = dataset_in_dir(dir.path());
    CHECK(d.connections == dir / "connections.jsonl");
}

TEST_CASE("unwritable report directory")
{
    TempDir dir("unw");
    testing::spit(dir / "file", "x");
    report::RunResults r;
    r.table1 = experiments::run_group_comparison(testing::fixture().dataset);
    CHECK_THROWS_AS(report::emit_report(r, "", dir / "file"), Error);
}
