#pragma once

// Read-only HTTP API over a dataset snapshot and a report directory.
//
//   GET /api/meta
//   GET /api/neurons?layer=1&filter=d:4,min_size:6,table1:true
//   GET /api/neurons/{layer}/{index}
//   GET /api/neurons/{layer}/{index}/pca
//   GET /api/experiments/{table1|table2|pca}
//   GET /<path>     static viewer bundle, when a static directory is given
//
// Routing is a pure function of the snapshot (handle()), so it is testable
// without sockets; serve() only binds it to an HTTP listener.

#include "catspace/config.hpp"
#include "catspace/experiments.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace catspace::serve {

struct NeuronSummary {
    NeuronId neuron;
    std::size_t core_tokens = 0;
    std::vector<std::size_t> taken_sizes;  // every non-empty taken-cluster, in precursor order
    std::size_t dimension = 0;             // clusters with at least min_cluster_size tokens
    std::vector<std::size_t> cluster_sizes;  // those clusters, ascending
    std::size_t distinct_tokens = 0;
    bool table1 = false;
    std::optional<GroupContrast> contrast;
};

class Snapshot {
public:
    Snapshot(Dataset dataset, experiments::AnalysisParams params, std::filesystem::path report_dir,
             std::filesystem::path static_dir = {});

    const Dataset& dataset() const { return dataset_; }
    const experiments::AnalysisParams& params() const { return params_; }
    const std::filesystem::path& report_dir() const { return report_dir_; }
    const std::filesystem::path& static_dir() const { return static_dir_; }
    const std::map<int, NeuronSummary>& summaries() const { return summaries_; }
    /// Report file contents read at startup, keyed by name (table1, table2, pca).
    const std::map<std::string, std::string>& experiments() const { return experiments_; }

private:
    Dataset dataset_;
    experiments::AnalysisParams params_;
    std::filesystem::path report_dir_;
    std::filesystem::path static_dir_;
    std::map<int, NeuronSummary> summaries_;
    std::map<std::string, std::string> experiments_;
};

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

using Query = std::map<std::string, std::string>;

Response handle(const Snapshot& snapshot, const std::string& method, const std::string& path, const Query& query = {});

struct NeuronFilter {
    std::optional<std::size_t> d;
    std::optional<std::size_t> min_d;
    std::optional<std::size_t> min_size;
    std::optional<bool> table1;
};

/// "key:value" pairs separated by commas; keys d, min_d, min_size, table1. Throws ConfigError.
NeuronFilter parse_filter(const std::string& text);

/// Blocks serving on host:port until stop() is called from another thread or the process ends.
class Server {
public:
    explicit Server(const Snapshot& snapshot);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds to a port (0 picks a free one) and returns it.
    int bind(const std::string& host, int port);
    void listen();  // after bind()
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace catspace::serve
