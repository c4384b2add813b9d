#pragma once

// Run configuration shared by the CLI subcommands. Every analysis writes its
// RunConfig as runconfig.json next to the report; feeding that file back
// reproduces the report bit for bit.

#include "catspace/experiments.hpp"
#include "catspace/ingest.hpp"
#include "catspace/report.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace catspace {

enum class Pipeline { Table1, Tau, Pca, All };

std::string_view to_string(Pipeline p);
Pipeline parse_pipeline(std::string_view s);

inline constexpr const char* kDataDirEnv = "CATSPACE_DATA_DIR";

struct RunConfig {
    DatasetConfig data;
    Pipeline pipeline = Pipeline::All;
    experiments::AnalysisParams params;
    std::optional<std::uint64_t> seed;  // generation seed when the dataset is synthetic
    std::filesystem::path out_dir = "report";
    int port = 8080;
};

/// Canonical file names inside a data directory.
DatasetConfig dataset_in_dir(const std::filesystem::path& dir);

void validate(const RunConfig& c);

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);

/// Runs the pipelines selected by c.pipeline.
report::RunResults run_pipelines(const Dataset& ds, const RunConfig& c);

/// Loads the dataset, runs the pipelines, writes the report and runconfig.json into c.out_dir.
report::Manifest run_and_emit(const RunConfig& c, unsigned threads = 0, report::RunResults* results = nullptr);

}  // namespace catspace
