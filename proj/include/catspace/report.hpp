#pragma once

// JSON views of pipeline results, SVG plots and the report directory.
//
// Layout of a report directory:
//   table1.json, table2.json, pca.json
//   plots/graph1.svg, plots/correlation_circle.svg, plots/factor_projection.svg
//   manifest.json   files above with sha256 and byte size
// Every JSON document carries "schema_version". Nothing time-dependent is
// written, so identical results give identical bytes.

#include "catspace/experiments.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace catspace::report {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

json to_json(NeuronId id);
json to_json(const stats::TestResult& r);
json to_json(const experiments::AnalysisParams& p);
json to_json(const GroupContrast& g);
json to_json(const TakenCluster& c);
json to_json(const CategoricalSpace& s);
json to_json(const ProximityMatrix& pm);
json to_json(const pca::PcaResult<double>& r);
json to_json(const experiments::MeanNeuron& m);

json table1_json(const experiments::Table1Result& r, const experiments::AnalysisParams& p);
json table2_json(const experiments::TauReport& r, const experiments::AnalysisParams& p);
json pca_json(const experiments::PcaStructure& r, const experiments::AnalysisParams& p);

std::string graph1_svg(const experiments::TauReport& r);
std::string correlation_circle_svg(const std::vector<pca::CirclePoint>& points, const pca::PcaResult<double>& r,
                                   const std::string& title);
std::string factor_projection_svg(const experiments::PcaStructure& r);

struct RunResults {
    experiments::AnalysisParams params;
    std::optional<experiments::Table1Result> table1;
    std::optional<experiments::TauReport> tau;
    std::optional<experiments::PcaStructure> pca;
};

struct ManifestEntry {
    std::string path;  // relative to the report directory, '/' separated
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct Manifest {
    std::vector<ManifestEntry> files;  // sorted by path
    std::string dataset_checksum;
};

/// Writes the report files for the results present plus manifest.json.
Manifest emit_report(const RunResults& results, const std::string& dataset_checksum, const std::filesystem::path& out_dir);

json to_json(const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

/// Pretty-printed JSON with a trailing newline.
void write_json_file(const std::filesystem::path& path, const json& j);
json read_json_file(const std::filesystem::path& path);

}  // namespace catspace::report
