#include "catspace/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace catspace {

std::string_view to_string(Pipeline p)
{
    switch (p) {
    case Pipeline::Table1: return "table1";
    case Pipeline::Tau: return "tau";
    case Pipeline::Pca: return "pca";
    case Pipeline::All: return "all";
    }
    return "?";
}

Pipeline parse_pipeline(std::string_view s)
{
    if (s == "table1") return Pipeline::Table1;
    if (s == "tau") return Pipeline::Tau;
    if (s == "pca") return Pipeline::Pca;
    if (s == "all") return Pipeline::All;
    throw ConfigError("unknown pipeline '" + std::string(s) + "' (expected table1, tau, pca or all)");
}

DatasetConfig dataset_in_dir(const fs::path& dir)
{
    DatasetConfig c;
    c.embeddings = dir / "embeddings.bin";
    c.profiles = dir / "profiles.jsonl";
    if (fs::exists(dir / "connections.jsonl")) c.connections = dir / "connections.jsonl";
    if (fs::exists(dir / "proj0.bin") && fs::exists(dir / "fc1.bin")) {
        c.proj0 = dir / "proj0.bin";
        c.fc1 = dir / "fc1.bin";
    }
    return c;
}

void validate(const RunConfig& c)
{
    experiments::validate(c.params);
    if (c.port < 1 || c.port > 65535) throw ConfigError("port must lie in [1, 65535]");
    if (c.out_dir.empty()) throw ConfigError("output directory must not be empty");
}

json to_json(const RunConfig& c)
{
    auto path = [](const fs::path& p) { return p.empty() ? json(nullptr) : json(p.string()); };
    json params = report::to_json(c.params);
    return {{"schema_version", report::kSchemaVersion},
            {"data",
             {{"embeddings", path(c.data.embeddings)},
              {"profiles", path(c.data.profiles)},
              {"connections", path(c.data.connections)},
              {"proj0", path(c.data.proj0)},
              {"fc1", path(c.data.fc1)},
              {"weight_mode", c.data.weight_mode == WeightMode::Absolute ? "absolute" : "signed"}}},
            {"pipeline", std::string(to_string(c.pipeline))},
            {"params", params},
            {"seed", c.seed ? json(*c.seed) : json(nullptr)},
            {"out_dir", c.out_dir.string()},
            {"port", c.port}};
}

RunConfig run_config_from_json(const json& j)
{
    RunConfig c;
    try {
        const json& d = j.at("data");
        auto path = [&](const char* key) { return d.contains(key) && !d[key].is_null() ? fs::path(d[key].get<std::string>()) : fs::path(); };
        c.data.embeddings = path("embeddings");
        c.data.profiles = path("profiles");
        c.data.connections = path("connections");
        c.data.proj0 = path("proj0");
        c.data.fc1 = path("fc1");
        const std::string mode = d.value("weight_mode", "signed");
        if (mode != "signed" && mode != "absolute") throw ConfigError("weight_mode must be signed or absolute");
        c.data.weight_mode = mode == "absolute" ? WeightMode::Absolute : WeightMode::Signed;

        c.pipeline = parse_pipeline(j.value("pipeline", "all"));
        const json& p = j.at("params");
        auto& a = c.params;
        a.k = p.value("k", a.k);
        a.m = p.value("m", a.m);
        a.min_cluster_size = p.value("min_cluster_size", a.min_cluster_size);
        a.min_clusters = p.value("min_clusters", a.min_clusters);
        a.min_distinct_tokens = p.value("min_distinct_tokens", a.min_distinct_tokens);
        const std::string distinct = p.value("distinct_count", "union");
        if (distinct != "union" && distinct != "summed-sizes") throw ConfigError("distinct_count must be union or summed-sizes");
        a.distinct = distinct == "union" ? experiments::DistinctCount::Union : experiments::DistinctCount::SummedSizes;
        a.self_policy = parse_self_policy(p.value("self_policy", "include"));
        a.d_tau = p.value("d_tau", a.d_tau);
        a.d_pca = p.value("d_pca", a.d_pca);
        a.sample_circles = p.value("sample_circles", a.sample_circles);
        c.data.k = a.k;

        if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
        c.out_dir = j.value("out_dir", std::string("report"));
        c.port = j.value("port", 8080);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed run configuration: ") + e.what());
    }
    validate(c);
    return c;
}

RunConfig load_run_config(const fs::path& path)
{
    try {
        return run_config_from_json(report::read_json_file(path));
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
}

report::RunResults run_pipelines(const Dataset& ds, const RunConfig& c)
{
    report::RunResults r;
    r.params = c.params;
    const bool all = c.pipeline == Pipeline::All;
    if (all || c.pipeline == Pipeline::Table1) r.table1 = experiments::run_group_comparison(ds, c.params);
    if (all || c.pipeline == Pipeline::Tau) r.tau = experiments::run_ordinal_correlation(ds, c.params);
    if (all || c.pipeline == Pipeline::Pca) r.pca = experiments::run_pca_structure(ds, c.params);
    return r;
}

report::Manifest run_and_emit(const RunConfig& c, unsigned threads, report::RunResults* results_out)
{
    validate(c);
    DatasetConfig data = c.data;
    data.k = c.params.k;
    const Dataset ds = load_dataset(data);
    RunConfig effective = c;
    effective.params.threads = threads;
    if (ds.provenance.seed) effective.seed = ds.provenance.seed;
    const report::RunResults results = run_pipelines(ds, effective);
    report::Manifest manifest = report::emit_report(results, ds.provenance.checksum, c.out_dir);
    effective.params.threads = 0;
    report::write_json_file(c.out_dir / "runconfig.json", to_json(effective));
    if (results_out) *results_out = results;
    return manifest;
}

}  // namespace catspace
