// catspace: categorical vector spaces of MLP neurons.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error.

#include "catspace/adapter.hpp"
#include "catspace/config.hpp"
#include "catspace/report.hpp"
#include "catspace/serve.hpp"
#include "catspace/synth.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <set>

namespace fs = std::filesystem;
using namespace catspace;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct DataOptions {
    std::string data_dir;
    std::string embeddings, profiles, connections, proj0, fc1;
    bool abs_weights = false;

    void add(CLI::App& app)
    {
        app.add_option("--data-dir", data_dir, std::string("dataset directory (default: $") + kDataDirEnv + ")");
        app.add_option("--embeddings", embeddings, "embedding file");
        app.add_option("--profiles", profiles, "profile file (JSON lines)");
        app.add_option("--connections", connections, "precomputed connections file");
        app.add_option("--proj0", proj0, "layer-0 output projection weight file");
        app.add_option("--fc1", fc1, "layer-1 input weight file");
        app.add_flag("--abs-weights", abs_weights, "rank precursors by absolute instead of signed weight");
    }

    DatasetConfig resolve() const
    {
        DatasetConfig c;
        const bool explicit_paths = !embeddings.empty() || !profiles.empty() || !connections.empty() || !proj0.empty() || !fc1.empty();
        if (explicit_paths) {
            c.embeddings = embeddings;
            c.profiles = profiles;
            c.connections = connections;
            c.proj0 = proj0;
            c.fc1 = fc1;
        } else {
            std::string dir = data_dir;
            if (dir.empty()) {
                if (const char* env = std::getenv(kDataDirEnv)) dir = env;
            }
            if (dir.empty()) throw ConfigError(std::string("no dataset given: pass --data-dir or dataset paths, or set ") + kDataDirEnv);
            if (!fs::is_directory(dir)) throw DataError("data directory " + dir + " does not exist");
            c = dataset_in_dir(dir);
        }
        for (fs::path* p : {&c.embeddings, &c.profiles, &c.connections, &c.proj0, &c.fc1})
            if (!p->empty()) *p = fs::absolute(*p).lexically_normal();
        c.weight_mode = abs_weights ? WeightMode::Absolute : WeightMode::Signed;
        return c;
    }
};

struct ParamOptions {
    experiments::AnalysisParams p;
    std::string self = "include";
    bool summed_sizes = false;
    std::size_t d = 0;

    void add(CLI::App& app, bool with_d)
    {
        app.add_option("--k", p.k, "precursors per target")->capture_default_str();
        app.add_option("--m", p.m, "tokens per activation group")->capture_default_str();
        app.add_option("--min-cluster-size", p.min_cluster_size, "minimum taken-cluster size")->capture_default_str();
        app.add_option("--min-clusters", p.min_clusters, "minimum surviving clusters (table1)")->capture_default_str();
        app.add_option("--min-distinct-tokens", p.min_distinct_tokens, "minimum distinct tokens (table1)")->capture_default_str();
        app.add_flag("--summed-sizes", summed_sizes, "count tokens as summed cluster sizes instead of the union");
        app.add_option("--self", self, "self-inclusion in proximity scores")->check(CLI::IsMember({"include", "exclude"}))->capture_default_str();
        app.add_option("--d-tau", p.d_tau, "sub-dimension count for the tau study")->capture_default_str();
        app.add_option("--d-pca", p.d_pca, "sub-dimension count for the PCA study")->capture_default_str();
        if (with_d) app.add_option("--d", d, "sub-dimension count for the selected study (tau or pca)");
        app.add_option("--sample-circles", p.sample_circles, "per-neuron correlation circles in the PCA study")->capture_default_str();
        app.add_option("--threads", p.threads, "worker threads (0: all cores)")->capture_default_str();
    }

    experiments::AnalysisParams resolve(Pipeline pipeline) const
    {
        experiments::AnalysisParams out = p;
        out.self_policy = parse_self_policy(self);
        out.distinct = summed_sizes ? experiments::DistinctCount::SummedSizes : experiments::DistinctCount::Union;
        if (d > 0) {
            if (pipeline == Pipeline::Tau)
                out.d_tau = d;
            else if (pipeline == Pipeline::Pca)
                out.d_pca = d;
            else
                throw ConfigError("--d applies to 'analyze tau' or 'analyze pca'; use --d-tau / --d-pca with " + std::string(to_string(pipeline)));
        }
        experiments::validate(out);
        return out;
    }
};

void print_table1(const json& t)
{
    const auto& f = t.at("fields");
    std::cout << "table1: n=" << f["n"] << " mean_delta=" << f["mean_delta"] << " pct_delta_pos=" << f["pct_delta_pos"]
              << " p_chi=" << f["p_chi_delta_pos"] << " pct_kw_sig=" << f["pct_kw_sig"] << " mean_delta_c=" << f["mean_delta_c"] << "\n";
}

void print_summary(const report::RunResults& r)
{
    if (r.table1) print_table1(report::table1_json(*r.table1, r.params));
    if (r.tau) {
        std::cout << "table2: n=" << r.tau->n_neurons;
        for (std::size_t k = 0; k < r.tau->dims.size(); ++k)
            std::cout << " tau_D" << k + 1 << "=" << r.tau->dims[k].tau << " (p=" << r.tau->dims[k].p_value << ")";
        std::cout << "\n";
        if (!r.tau->mean.dropped.empty())
            std::cerr << "warning: " << r.tau->mean.dropped.size() << " neuron(s) with fewer than 100 core-tokens left out of the mean neuron\n";
    }
    if (r.pca) {
        const auto& res = r.pca->result;
        std::cout << "pca: n=" << r.pca->n_neurons << " VP1=" << res.eigenvalues(0) << " (" << 100.0 * res.explained_ratio(0) << "%)"
                  << " VP2=" << res.eigenvalues(1) << " (" << 100.0 * res.explained_ratio(1) << "%)"
                  << " KMO=" << (res.kmo ? std::to_string(*res.kmo) : std::string("n/a")) << " p_bartlett=" << res.bartlett.p_value
                  << " circles=" << 1 + r.pca->per_neuron.size() << "\n";
        for (const auto& s : r.pca->skipped) std::cerr << "warning: per-neuron PCA skipped for " << s << "\n";
        if (!r.pca->mean.dropped.empty())
            std::cerr << "warning: " << r.pca->mean.dropped.size() << " neuron(s) with fewer than 100 core-tokens left out of the mean neuron\n";
    }
}

std::vector<fs::path> collect_record_files(const std::vector<std::string>& inputs)
{
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            for (const auto& e : fs::recursive_directory_iterator(p))
                if (e.is_regular_file() && (e.path().extension() == ".json" || e.path().extension() == ".jsonl")) files.push_back(e.path());
        } else if (fs::is_regular_file(p)) {
            files.push_back(p);
        } else {
            throw DataError("activation records path " + in + " does not exist");
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"catspace: categorical vector spaces of transformer MLP neurons"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "catspace 1.0.0");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate a dataset and write it in canonical form");
    DataOptions ingest_data;
    ingest_data.add(*ingest);
    std::string ingest_out;
    std::size_t ingest_k = 10;
    std::vector<std::string> records;
    std::string vocab_path;
    ingest->add_option("--out", ingest_out, "output directory")->required();
    ingest->add_option("--k", ingest_k, "precursors kept per target when deriving connections from weights")->capture_default_str();
    ingest->add_option("--activation-records", records, "activation-records release files or directories (adapter mode)");
    ingest->add_option("--vocab", vocab_path, "GPT-2 encoder.json for the adapter");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset with planted sub-dimensions");
    synth::SynthConfig sc;
    std::string synth_out;
    bool synth_null = false, synth_fixture = false;
    std::string subdims;
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_flag("--fixture", synth_fixture, "small fixture configuration (8 neurons per layer); other flags still apply");
    synth_cmd->add_option("--seed", sc.seed, "generation seed")->capture_default_str();
    synth_cmd->add_option("--neurons", sc.neurons_per_layer, "neurons per layer")->capture_default_str();
    synth_cmd->add_option("--vocab", sc.vocab_size, "vocabulary size")->capture_default_str();
    synth_cmd->add_option("--dim", sc.dim, "embedding dimension")->capture_default_str();
    synth_cmd->add_option("--boost", sc.intersection_boost, "activation gain per membership")->capture_default_str();
    synth_cmd->add_option("--base", sc.base_activation, "base activation")->capture_default_str();
    synth_cmd->add_option("--noise-sigma", sc.noise_sigma, "activation noise")->capture_default_str();
    synth_cmd->add_option("--embedding-noise", sc.embedding_noise, "expected norm of embedding noise")->capture_default_str();
    synth_cmd->add_option("--subdims", subdims, "sub-dimension count weights, e.g. 3:1,4:1");
    synth_cmd->add_flag("--null", synth_null, "null model: activations independent of membership");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "run the studies and write a report");
    std::string pipeline_name;
    DataOptions analyze_data;
    ParamOptions analyze_params;
    std::string analyze_out = "report";
    analyze->add_option("pipeline", pipeline_name, "table1 | tau | pca | all")->required()->check(CLI::IsMember({"table1", "tau", "pca", "all"}));
    analyze_data.add(*analyze);
    analyze_params.add(*analyze, true);
    analyze->add_option("--out", analyze_out, "report directory")->capture_default_str();

    // report
    auto* report_cmd = app.add_subcommand("report", "re-run a report from its runconfig.json, or verify one");
    std::string report_config, report_out, report_verify;
    unsigned report_threads = 0;
    auto* config_opt = report_cmd->add_option("--config", report_config, "runconfig.json written by analyze");
    report_cmd->add_option("--out", report_out, "report directory (default: the one recorded in the config)");
    auto* verify_opt = report_cmd->add_option("--verify", report_verify, "report directory whose manifest to check");
    report_cmd->add_option("--threads", report_threads, "worker threads (0: all cores)");
    config_opt->excludes(verify_opt);

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "read-only API over a dataset and report");
    DataOptions serve_data;
    serve_data.add(*serve_cmd);
    std::string serve_report, serve_static, host = "127.0.0.1";
    int port = 8080;
    unsigned serve_threads = 0;
    serve_cmd->add_option("--report", serve_report, "report directory")->required();
    serve_cmd->add_option("--static", serve_static, "viewer bundle directory");
    serve_cmd->add_option("--host", host, "listen address")->capture_default_str();
    serve_cmd->add_option("--port", port, "listen port")->capture_default_str();
    serve_cmd->add_option("--threads", serve_threads, "worker threads for the startup pass (0: all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*ingest) {
            DatasetConfig dc;
            const fs::path out(ingest_out);
            fs::create_directories(out);
            if (!records.empty()) {
                if (vocab_path.empty()) throw ConfigError("--activation-records needs --vocab");
                if (ingest_data.embeddings.empty()) throw ConfigError("--activation-records needs --embeddings");
                const auto vocab = adapter::load_gpt2_vocabulary(vocab_path);
                adapter::AdapterSummary summary;
                auto [l0, l1] = adapter::profiles_from_activation_records(collect_record_files(records), vocab, summary);
                ProfileFileMeta meta;
                meta.vocab_size = load_embeddings(ingest_data.embeddings).vocab_size();
                meta.activation_semantics = adapter::kRecordsSemantics;
                write_neuron_profiles(out / "profiles.jsonl", meta, {&l0, &l1});
                std::cout << "adapter: " << summary.files << " files, " << summary.neurons << " neurons, " << summary.unmapped_occurrences
                          << " of " << summary.occurrences << " token occurrences not in the vocabulary\n";
                DataOptions d = ingest_data;
                d.profiles = (out / "profiles.jsonl").string();
                dc = d.resolve();
            } else {
                dc = ingest_data.resolve();
            }
            dc.k = ingest_k;
            const Dataset ds = load_dataset(dc);
            const fs::path emb = out / "embeddings.bin";
            if (fs::absolute(dc.embeddings).lexically_normal() != fs::absolute(emb).lexically_normal()) write_embeddings(emb, ds.embeddings);
            ProfileFileMeta meta = read_profile_meta(dc.profiles);
            meta.vocab_size = ds.embeddings.vocab_size();
            meta.activation_semantics = ds.provenance.activation_semantics;
            meta.seed = ds.provenance.seed;
            write_neuron_profiles(out / "profiles.jsonl", meta, {&ds.profiles_l0, &ds.profiles_l1});
            write_connections(out / "connections.jsonl", ds.connections);

            std::size_t full = 0;
            std::set<std::uint32_t> covered;
            for (const auto* layer : {&ds.profiles_l0, &ds.profiles_l1})
                for (const auto& [i, p] : *layer) {
                    full += p.core_tokens.size() == kMaxCoreTokens;
                    for (const auto& t : p.core_tokens) covered.insert(t.token.value);
                }
            json summary{{"schema_version", report::kSchemaVersion},
                         {"vocab_size", ds.embeddings.vocab_size()},
                         {"dim", ds.embeddings.dim()},
                         {"neurons_l0", ds.profiles_l0.size()},
                         {"neurons_l1", ds.profiles_l1.size()},
                         {"profiles_with_100_tokens", full},
                         {"distinct_core_tokens", covered.size()},
                         {"connection_source", ds.provenance.connection_source},
                         {"notes", ds.provenance.notes},
                         {"provenance_checksum", ds.provenance.checksum}};
            report::write_json_file(out / "ingest_summary.json", summary);
            std::cout << summary.dump(2) << "\n";
            return 0;
        }

        if (*synth_cmd) {
            synth::SynthConfig config = sc;
            if (synth_fixture) {
                synth::SynthConfig f = synth::fixture_config();
                // explicit flags win over fixture values
                if (synth_cmd->count("--seed")) f.seed = sc.seed;
                if (synth_cmd->count("--neurons")) f.neurons_per_layer = sc.neurons_per_layer;
                if (synth_cmd->count("--vocab")) f.vocab_size = sc.vocab_size;
                if (synth_cmd->count("--dim")) f.dim = sc.dim;
                if (synth_cmd->count("--boost")) f.intersection_boost = sc.intersection_boost;
                if (synth_cmd->count("--base")) f.base_activation = sc.base_activation;
                if (synth_cmd->count("--noise-sigma")) f.noise_sigma = sc.noise_sigma;
                if (synth_cmd->count("--embedding-noise")) f.embedding_noise = sc.embedding_noise;
                config = f;
            }
            if (!subdims.empty()) {
                config.subdims_per_neuron.clear();
                for (const auto& term : CLI::detail::split(subdims, ',')) {
                    const auto colon = term.find(':');
                    try {
                        if (colon == std::string::npos) throw std::invalid_argument(term);
                        config.subdims_per_neuron[std::stoul(term.substr(0, colon))] = std::stod(term.substr(colon + 1));
                    } catch (const std::logic_error&) {
                        throw ConfigError("malformed --subdims term '" + term + "' (expected count:weight)");
                    }
                }
            }
            const synth::SyntheticData data = synth_null ? synth::null_model(config) : synth::generate(config);
            const auto files = synth::write_dataset(data.dataset, synth_out);
            json planted = json::array();
            for (const auto& p : data.planted) {
                json clusters = json::array();
                for (std::size_t k = 0; k < p.clusters.size(); ++k) {
                    json tokens = json::array();
                    for (TokenId t : p.clusters[k]) tokens.push_back(t.value);
                    clusters.push_back({{"precursor", p.precursors[k].index}, {"tokens", tokens}});
                }
                planted.push_back({{"target", p.target.index}, {"pool", p.pool}, {"clusters", clusters}});
            }
            json cfg{{"seed", config.seed},
                     {"vocab_size", config.vocab_size},
                     {"dim", config.dim},
                     {"neurons_per_layer", config.neurons_per_layer},
                     {"base_activation", config.base_activation},
                     {"intersection_boost", config.intersection_boost},
                     {"noise_sigma", config.noise_sigma},
                     {"embedding_noise", config.embedding_noise},
                     {"null_model", synth_null}};
            report::write_json_file(fs::path(synth_out) / "planted.json",
                                    {{"schema_version", report::kSchemaVersion}, {"config", cfg}, {"neurons", planted}});
            std::cout << "wrote " << files.embeddings.string() << ", " << files.profiles.string() << ", " << files.connections.string() << "\n";
            return 0;
        }

        if (*analyze) {
            RunConfig config;
            config.pipeline = parse_pipeline(pipeline_name);
            config.data = analyze_data.resolve();
            config.params = analyze_params.resolve(config.pipeline);
            config.data.k = config.params.k;
            config.out_dir = analyze_out;
            report::RunResults results;
            const report::Manifest manifest = run_and_emit(config, config.params.threads, &results);
            print_summary(results);
            for (const auto& f : manifest.files) std::cout << f.sha256 << "  " << (config.out_dir / f.path).string() << "\n";
            return 0;
        }

        if (*report_cmd) {
            if (!report_verify.empty()) {
                const fs::path dir(report_verify);
                const report::Manifest m = report::read_manifest(dir / "manifest.json");
                int bad = 0;
                for (const auto& f : m.files) {
                    const std::string actual = fs::exists(dir / f.path) ? sha256_file(dir / f.path) : std::string("missing");
                    const bool ok = actual == f.sha256;
                    bad += !ok;
                    std::cout << (ok ? "OK    " : "FAIL  ") << f.path << "\n";
                }
                return bad ? kExitData : 0;
            }
            if (report_config.empty()) throw ConfigError("report needs --config or --verify");
            RunConfig config = load_run_config(report_config);
            if (!report_out.empty()) config.out_dir = report_out;
            const report::Manifest manifest = run_and_emit(config, report_threads);
            for (const auto& f : manifest.files) std::cout << f.sha256 << "  " << (config.out_dir / f.path).string() << "\n";
            return 0;
        }

        if (*serve_cmd) {
            const fs::path report_dir(serve_report);
            if (!fs::is_directory(report_dir)) throw DataError("report directory " + serve_report + " does not exist");
            experiments::AnalysisParams params;
            if (fs::exists(report_dir / "runconfig.json")) params = load_run_config(report_dir / "runconfig.json").params;
            params.threads = serve_threads;
            if (port < 1 || port > 65535) throw ConfigError("port must lie in [1, 65535]");
            serve::Snapshot snapshot(load_dataset(serve_data.resolve()), params, report_dir, serve_static);
            serve::Server server(snapshot);
            const int bound = server.bind(host, port);
            std::cout << "serving on http://" << host << ":" << bound << std::endl;
            server.listen();
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
