#include "catspace/serve.hpp"

#include "catspace/report.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace catspace::serve {

namespace {

Response json_response(int status, const json& body) { return {status, "application/json", body.dump() + "\n"}; }
Response error(int status, const std::string& message) { return json_response(status, {{"error", message}, {"status", status}}); }

std::optional<std::size_t> parse_count(std::string_view s)
{
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::optional<int> parse_int(std::string_view s)
{
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    return out;
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string content_type_for(const fs::path& p)
{
    const std::string ext = p.extension().string();
    if (ext == ".html") return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs") return "text/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    return "application/octet-stream";
}

json summary_json(const NeuronSummary& s)
{
    json j{{"layer", s.neuron.layer},
           {"index", s.neuron.index},
           {"core_tokens", s.core_tokens},
           {"d", s.dimension},
           {"cluster_sizes", s.cluster_sizes},
           {"taken_sizes", s.taken_sizes},
           {"distinct_tokens", s.distinct_tokens},
           {"table1", s.table1}};
    if (s.contrast) {
        j["delta"] = s.contrast->delta;
        j["kw_p"] = s.contrast->kw_p;
        j["mwu_p"] = s.contrast->mwu_p;
        j["cliffs"] = s.contrast->cliffs;
    } else {
        j["delta"] = j["kw_p"] = j["mwu_p"] = j["cliffs"] = nullptr;
    }
    return j;
}

CategoricalSpace space_for(const Snapshot& snap, NeuronId id, OrderPolicy order)
{
    const auto& p = snap.params();
    CategoricalSpace space = build_categorical_space(build_taken_clusters(snap.dataset(), id, p.k), p.min_cluster_size, order);
    space.target = id;
    return space;
}

std::optional<NeuronId> lookup(const Snapshot& snap, const std::string& layer, const std::string& index)
{
    const auto l = parse_int(layer);
    const auto i = parse_int(index);
    if (!l || !i || (*l != 0 && *l != 1)) return std::nullopt;
    const auto& profiles = snap.dataset().layer(*l);
    if (!profiles.contains(*i)) return std::nullopt;
    return NeuronId{*l, *i};
}

Response neuron_detail(const Snapshot& snap, NeuronId id)
{
    const Dataset& ds = snap.dataset();
    const NeuronProfile& profile = ds.profile(id);
    json body{{"schema_version", report::kSchemaVersion}, {"neuron", report::to_json(id)}};

    std::optional<CategoricalSpace> space;
    std::vector<TakenCluster> taken;
    if (id.layer == 1 && ds.connections.contains(id.index)) {
        taken = build_taken_clusters(ds, id, snap.params().k);
        space = space_for(snap, id, OrderPolicy::SizeAscending);
    }

    json rows = json::array();
    for (std::size_t r = 0; r < profile.core_tokens.size(); ++r) {
        const auto& ct = profile.core_tokens[r];
        json member = json::array();
        if (space) {
            for (std::size_t k = 0; k < space->subdims.size(); ++k) {
                const auto& t = space->subdims[k].tokens;
                if (std::binary_search(t.begin(), t.end(), ct.token)) member.push_back(k);
            }
        }
        rows.push_back({{"rank", r + 1}, {"token_id", ct.token.value}, {"token_str", ct.text}, {"activation", ct.activation}, {"clusters", member}});
    }
    body["profile"] = rows;

    json taken_json = json::array();
    for (const auto& c : taken) taken_json.push_back(report::to_json(c));
    body["taken_clusters"] = taken_json;
    body["space"] = space ? report::to_json(*space) : json(nullptr);
    body["proximity"] = nullptr;
    body["contrast"] = nullptr;
    if (space && !space->subdims.empty()) {
        const ProximityMatrix pm = proximity_scores(*space, profile, ds.embeddings, snap.params().self_policy);
        body["proximity"] = report::to_json(pm);
        const auto& summary = snap.summaries().at(id.index);
        if (summary.contrast) body["contrast"] = report::to_json(*summary.contrast);
    }
    const auto it = id.layer == 1 ? snap.summaries().find(id.index) : snap.summaries().end();
    body["table1"] = it != snap.summaries().end() && it->second.table1;
    return json_response(200, body);
}

Response neuron_pca(const Snapshot& snap, NeuronId id)
{
    json body{{"schema_version", report::kSchemaVersion}, {"neuron", report::to_json(id)}, {"available", false}};
    if (id.layer != 1 || !snap.dataset().connections.contains(id.index)) {
        body["reason"] = "per-neuron PCA is defined for layer-1 neurons with connections";
        return json_response(200, body);
    }
    const CategoricalSpace space = space_for(snap, id, OrderPolicy::SizeDescending);
    if (space.dimension() < 2) {
        body["reason"] = "fewer than two sub-dimensions";
        return json_response(200, body);
    }
    const ProximityMatrix pm = experiments::ranked_proximity(space, snap.dataset(), snap.params().self_policy);
    Matrix data(static_cast<Eigen::Index>(pm.rows.size()), static_cast<Eigen::Index>(space.dimension()));
    for (std::size_t r = 0; r < pm.rows.size(); ++r) {
        for (std::size_t k = 0; k < space.dimension(); ++k) {
            if (!pm.rows[r].coords[k]) {
                body["reason"] = "undefined proximity coordinate";
                return json_response(200, body);
            }
            data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = *pm.rows[r].coords[k];
        }
    }
    try {
        const auto result = pca::pca(data);
        json circle = json::array();
        for (const auto& p : pca::correlation_circle(result, 0, 1))
            circle.push_back({{"variable", "D" + std::to_string(p.variable + 1)}, {"x", p.x}, {"y", p.y}});
        json projections = json::array();
        for (std::size_t r = 0; r < pm.rows.size(); ++r) {
            json scores = json::array();
            for (Eigen::Index f = 0; f < result.factors(); ++f) scores.push_back(result.scores(static_cast<Eigen::Index>(r), f));
            projections.push_back({{"token_id", pm.rows[r].token.value}, {"activation", pm.rows[r].activation}, {"scores", scores}});
        }
        body["available"] = true;
        body["order"] = std::string(to_string(OrderPolicy::SizeDescending));
        body["pca"] = report::to_json(result);
        body["circle"] = circle;
        body["projections"] = projections;
    } catch (const std::invalid_argument& e) {
        body["reason"] = e.what();
    }
    return json_response(200, body);
}

Response neuron_list(const Snapshot& snap, const Query& query)
{
    int layer = 1;
    if (auto it = query.find("layer"); it != query.end() && !it->second.empty()) {
        const auto l = parse_int(it->second);
        if (!l || (*l != 0 && *l != 1)) return error(400, "layer must be 0 or 1");
        layer = *l;
    }
    NeuronFilter filter;
    if (auto it = query.find("filter"); it != query.end()) {
        try {
            filter = parse_filter(it->second);
        } catch (const ConfigError& e) {
            return error(400, e.what());
        }
    }
    json list = json::array();
    if (layer == 0) {
        const bool cluster_filter = filter.d || filter.min_d || filter.table1;
        if (!cluster_filter) {
            for (const auto& [index, profile] : snap.dataset().profiles_l0)
                list.push_back({{"layer", 0}, {"index", index}, {"core_tokens", profile.core_tokens.size()}});
        }
    } else {
        const std::size_t min_size = filter.min_size.value_or(snap.params().min_cluster_size);
        for (const auto& [index, s] : snap.summaries()) {
            const std::size_t d = static_cast<std::size_t>(std::count_if(s.taken_sizes.begin(), s.taken_sizes.end(),
                                                                         [&](std::size_t n) { return n >= min_size; }));
            if (filter.d && d != *filter.d) continue;
            if (filter.min_d && d < *filter.min_d) continue;
            if (filter.table1 && s.table1 != *filter.table1) continue;
            json j = summary_json(s);
            j["d"] = d;
            list.push_back(std::move(j));
        }
    }
    json f = json::object();
    if (filter.d) f["d"] = *filter.d;
    if (filter.min_d) f["min_d"] = *filter.min_d;
    if (filter.min_size) f["min_size"] = *filter.min_size;
    if (filter.table1) f["table1"] = *filter.table1;
    return json_response(200, {{"schema_version", report::kSchemaVersion}, {"layer", layer}, {"filter", f}, {"count", list.size()}, {"neurons", list}});
}

Response meta(const Snapshot& snap)
{
    const Dataset& ds = snap.dataset();
    json sources = json::array();
    for (const auto& s : ds.provenance.sources) sources.push_back({{"role", s.role}, {"sha256", s.sha256}});
    json experiments = json::array();
    for (const auto& [name, body] : snap.experiments()) experiments.push_back(name);
    return json_response(200, {{"schema_version", report::kSchemaVersion},
                               {"dataset",
                                {{"vocab_size", ds.embeddings.vocab_size()},
                                 {"dim", ds.embeddings.dim()},
                                 {"neurons_l0", ds.profiles_l0.size()},
                                 {"neurons_l1", ds.profiles_l1.size()},
                                 {"connection_source", ds.provenance.connection_source},
                                 {"activation_semantics", ds.provenance.activation_semantics},
                                 {"seed", ds.provenance.seed ? json(*ds.provenance.seed) : json(nullptr)},
                                 {"checksum", ds.provenance.checksum},
                                 {"sources", sources}}},
                               {"params", report::to_json(snap.params())},
                               {"experiments", experiments}});
}

Response static_file(const Snapshot& snap, const std::string& path)
{
    if (snap.static_dir().empty()) return error(404, "not found: " + path);
    fs::path rel = path == "/" ? fs::path("index.html") : fs::path(path.substr(1));
    for (const auto& part : rel)
        if (part == ".." || part.string().starts_with(".")) return error(404, "not found: " + path);
    const fs::path full = snap.static_dir() / rel;
    std::error_code ec;
    if (!fs::is_regular_file(full, ec)) return error(404, "not found: " + path);
    return {200, content_type_for(full), read_file(full)};
}

}  // namespace

NeuronFilter parse_filter(const std::string& text)
{
    NeuronFilter f;
    if (text.empty()) return f;
    std::set<std::string> seen;
    for (const auto& item : split(text, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("malformed filter term '" + item + "' (expected key:value)");
        const std::string key = item.substr(0, colon), value = item.substr(colon + 1);
        if (!seen.insert(key).second) throw ConfigError("filter key '" + key + "' given twice");
        if (key == "table1") {
            if (value != "true" && value != "false") throw ConfigError("filter table1 expects true or false");
            f.table1 = value == "true";
            continue;
        }
        const auto n = parse_count(value);
        if (!n) throw ConfigError("filter " + key + " expects a non-negative integer, got '" + value + "'");
        if (key == "d")
            f.d = *n;
        else if (key == "min_d")
            f.min_d = *n;
        else if (key == "min_size")
            f.min_size = *n;
        else
            throw ConfigError("unknown filter key '" + key + "'");
    }
    return f;
}

Snapshot::Snapshot(Dataset dataset, experiments::AnalysisParams params, fs::path report_dir, fs::path static_dir)
    : dataset_(std::move(dataset)), params_(params), report_dir_(std::move(report_dir)), static_dir_(std::move(static_dir))
{
    experiments::validate(params_);
    const auto table1 = experiments::filter_table1(dataset_, params_);
    std::set<int> in_table1;
    for (const auto& s : table1) in_table1.insert(s.target.index);

    std::vector<int> indices;
    for (const auto& [index, conn] : dataset_.connections)
        if (dataset_.profiles_l1.contains(index)) indices.push_back(index);
    std::vector<NeuronSummary> out(indices.size());
    experiments::parallel_for(indices.size(), params_.threads, [&](std::size_t i) {
        const NeuronId id{1, indices[i]};
        NeuronSummary& s = out[i];
        s.neuron = id;
        s.core_tokens = dataset_.profile(id).core_tokens.size();
        const auto taken = build_taken_clusters(dataset_, id, params_.k);
        for (const auto& c : taken) s.taken_sizes.push_back(c.tokens.size());
        CategoricalSpace space = build_categorical_space(taken, params_.min_cluster_size, OrderPolicy::SizeAscending);
        space.target = id;
        s.dimension = space.dimension();
        for (const auto& c : space.subdims) s.cluster_sizes.push_back(c.tokens.size());
        s.distinct_tokens = space.distinct_tokens();
        s.table1 = in_table1.contains(id.index);
        if (s.dimension > 0 && s.core_tokens >= 2 * params_.m) {
            const auto pm = proximity_scores(space, dataset_.profile(id), dataset_.embeddings, params_.self_policy);
            const bool defined = std::all_of(pm.rows.begin(), pm.rows.end(), [](const ProximityRow& r) { return std::isfinite(r.mean); });
            if (defined) s.contrast = group_contrast(pm, params_.m);
        }
    });
    for (auto& s : out) summaries_.emplace(s.neuron.index, std::move(s));

    for (const char* name : {"table1", "table2", "pca"}) {
        const fs::path file = report_dir_ / (std::string(name) + ".json");
        std::error_code ec;
        if (!report_dir_.empty() && fs::is_regular_file(file, ec)) experiments_.emplace(name, read_file(file));
    }
}

Response handle(const Snapshot& snap, const std::string& method, const std::string& path, const Query& query)
{
    if (method != "GET" && method != "HEAD") return error(405, "read-only API: only GET is supported");
    try {
        if (path == "/api/meta") return meta(snap);
        if (path == "/api/neurons") return neuron_list(snap, query);
        if (path.starts_with("/api/neurons/")) {
            const auto parts = split(path.substr(std::string("/api/neurons/").size()), '/');
            if (parts.size() < 2 || parts.size() > 3 || (parts.size() == 3 && parts[2] != "pca")) return error(404, "not found: " + path);
            const auto id = lookup(snap, parts[0], parts[1]);
            if (!id) return error(404, "unknown neuron " + parts[0] + "/" + parts[1]);
            return parts.size() == 3 ? neuron_pca(snap, *id) : neuron_detail(snap, *id);
        }
        if (path.starts_with("/api/experiments/")) {
            const std::string name = path.substr(std::string("/api/experiments/").size());
            if (name != "table1" && name != "table2" && name != "pca") return error(404, "unknown experiment '" + name + "'");
            const auto it = snap.experiments().find(name);
            if (it == snap.experiments().end()) return error(404, name + " is not part of the report");
            return {200, "application/json", it->second};
        }
        if (path.starts_with("/api/")) return error(404, "not found: " + path);
        return static_file(snap, path);
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
}

struct Server::Impl {
    const Snapshot& snapshot;
    httplib::Server http;
    explicit Impl(const Snapshot& s) : snapshot(s) {}
};

Server::Server(const Snapshot& snapshot) : impl_(std::make_unique<Impl>(snapshot))
{
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        Query query;
        for (const auto& [k, v] : req.params) query.emplace(k, v);
        const Response r = handle(impl_->snapshot, req.method, req.path, query);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    impl_->http.Get(".*", handler);
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port)
{
    if (port == 0) {
        const int p = impl_->http.bind_to_any_port(host);
        if (p < 0) throw Error("cannot bind " + host);
        return p;
    }
    if (!impl_->http.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop()
{
    if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

}  // namespace catspace::serve
