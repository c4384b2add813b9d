#include "catspace/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace catspace::report {

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json optional_coords(const std::vector<std::optional<double>>& coords)
{
    json out = json::array();
    for (const auto& c : coords) out.push_back(c ? json(*c) : json(nullptr));
    return out;
}

json matrix_json(const Matrix& m)
{
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number_or_null(m(r, c)));
        out.push_back(std::move(row));
    }
    return out;
}

json vector_json(const Vector& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number_or_null(v(i)));
    return out;
}

json circle_json(const std::vector<pca::CirclePoint>& points)
{
    json out = json::array();
    for (const auto& p : points) out.push_back({{"variable", "D" + std::to_string(p.variable + 1)}, {"x", p.x}, {"y", p.y}});
    return out;
}

std::string fmt(double v, int digits = 2)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Linear blue-to-red ramp on t in [0, 1].
std::string ramp(double t)
{
    t = std::clamp(t, 0.0, 1.0);
    const int r = static_cast<int>(std::lround(44 + t * (215 - 44)));
    const int g = static_cast<int>(std::lround(123 + t * (25 - 123)));
    const int b = static_cast<int>(std::lround(182 + t * (28 - 182)));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

const char* kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666", "#1f78b4", "#b2df8a"};

struct Range {
    double lo = 0.0, hi = 1.0;

    static Range of(const std::vector<double>& v)
    {
        Range r{v.front(), v.front()};
        for (double x : v) {
            if (!std::isfinite(x)) continue;
            r.lo = std::min(r.lo, x);
            r.hi = std::max(r.hi, x);
        }
        if (r.hi - r.lo < 1e-12) {
            r.lo -= 0.5;
            r.hi += 0.5;
        }
        const double pad = 0.05 * (r.hi - r.lo);
        return {r.lo - pad, r.hi + pad};
    }
    double map(double x, double a, double b) const { return a + (x - lo) / (hi - lo) * (b - a); }
};

std::string svg_open(int w, int h)
{
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" + std::to_string(h) +
           "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n" +
           "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, const std::string& s, const std::string& anchor = "middle", int size = 11)
{
    return "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" text-anchor=\"" + anchor + "\" font-size=\"" + std::to_string(size) + "\">" + s +
           "</text>\n";
}

std::string line(double x1, double y1, double x2, double y2, const std::string& stroke = "#444", double width = 1.0)
{
    return "<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) + "\" y2=\"" + fmt(y2) + "\" stroke=\"" + stroke +
           "\" stroke-width=\"" + fmt(width, 1) + "\"/>\n";
}

std::string circle(double cx, double cy, double r, const std::string& fill, const std::string& extra = "")
{
    return "<circle cx=\"" + fmt(cx) + "\" cy=\"" + fmt(cy) + "\" r=\"" + fmt(r) + "\" fill=\"" + fill + "\"" + extra + "/>\n";
}

// Axes box with tick labels at both ends.
std::string frame(double x0, double y0, double x1, double y1, const Range& xr, const Range& yr, const std::string& xlabel,
                  const std::string& ylabel)
{
    std::string s = "<rect x=\"" + fmt(x0) + "\" y=\"" + fmt(y0) + "\" width=\"" + fmt(x1 - x0) + "\" height=\"" + fmt(y1 - y0) +
                    "\" fill=\"none\" stroke=\"#444\"/>\n";
    s += text(x0, y1 + 14, fmt(xr.lo, 3)) + text(x1, y1 + 14, fmt(xr.hi, 3));
    s += text(x0 - 4, y1, fmt(yr.lo, 2), "end") + text(x0 - 4, y0 + 8, fmt(yr.hi, 2), "end");
    s += text((x0 + x1) / 2, y1 + 28, xlabel);
    s += "<text x=\"" + fmt(x0 - 34) + "\" y=\"" + fmt((y0 + y1) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 " + fmt(x0 - 34) +
         " " + fmt((y0 + y1) / 2) + ")\">" + ylabel + "</text>\n";
    return s;
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

// --- JSON views ----------------------------------------------------------------

json to_json(NeuronId id) { return {{"layer", id.layer}, {"index", id.index}}; }

json to_json(const stats::TestResult& r)
{
    json j{{"method", std::string(stats::to_string(r.method))},
           {"statistic", number_or_null(r.statistic)},
           {"p_value", r.p_value},
           {"degenerate", r.degenerate}};
    j["df"] = r.df ? json(*r.df) : json(nullptr);
    return j;
}

json to_json(const experiments::AnalysisParams& p)
{
    return {{"k", p.k},
            {"m", p.m},
            {"min_cluster_size", p.min_cluster_size},
            {"min_clusters", p.min_clusters},
            {"min_distinct_tokens", p.min_distinct_tokens},
            {"distinct_count", p.distinct == experiments::DistinctCount::Union ? "union" : "summed-sizes"},
            {"self_policy", std::string(to_string(p.self_policy))},
            {"d_tau", p.d_tau},
            {"d_pca", p.d_pca},
            {"sample_circles", p.sample_circles}};
}

json to_json(const GroupContrast& g)
{
    return {{"neuron", to_json(g.target)}, {"m", g.m},         {"alpha_min", g.alpha_min}, {"alpha_max", g.alpha_max},
            {"s_min", g.s_min},            {"s_max", g.s_max}, {"delta", g.delta},         {"kw_p", g.kw_p},
            {"mwu_p", g.mwu_p},            {"cliffs", g.cliffs}};
}

json to_json(const TakenCluster& c)
{
    json tokens = json::array();
    for (TokenId t : c.tokens) tokens.push_back(t.value);
    return {{"precursor", to_json(c.precursor)}, {"weight", c.weight}, {"size", c.tokens.size()}, {"tokens", tokens}};
}

json to_json(const CategoricalSpace& s)
{
    json clusters = json::array();
    for (const auto& c : s.subdims) clusters.push_back(to_json(c));
    return {{"neuron", to_json(s.target)},
            {"order", std::string(to_string(s.order))},
            {"dimension", s.dimension()},
            {"distinct_tokens", s.distinct_tokens()},
            {"clusters", clusters}};
}

json to_json(const ProximityMatrix& pm)
{
    json rows = json::array();
    for (const auto& r : pm.rows) {
        rows.push_back({{"token_id", r.token.value}, {"activation", r.activation}, {"coords", optional_coords(r.coords)}, {"mean", number_or_null(r.mean)}});
    }
    return {{"neuron", to_json(pm.target)}, {"self_policy", std::string(to_string(pm.self_policy))}, {"rows", rows}};
}

json to_json(const pca::PcaResult<double>& r)
{
    json j{{"eigenvalues", vector_json(r.eigenvalues)},
           {"explained_ratio", vector_json(r.explained_ratio)},
           {"loadings", matrix_json(r.loadings)},
           {"correlation", matrix_json(r.correlation)},
           {"bartlett", to_json(r.bartlett)}};
    j["kmo"] = r.kmo ? json(*r.kmo) : json(nullptr);
    j["kmo_adequacy"] = r.kmo ? json(std::string(stats::to_string(stats::classify_kmo(*r.kmo)))) : json(nullptr);
    return j;
}

json to_json(const experiments::MeanNeuron& m)
{
    json neurons = json::array(), dropped = json::array(), rows = json::array();
    for (auto id : m.neurons) neurons.push_back(to_json(id));
    for (auto id : m.dropped) dropped.push_back(to_json(id));
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        json prox = json::array();
        for (double v : m.rows[r].proximity) prox.push_back(number_or_null(v));
        rows.push_back({{"rank", r + 1}, {"activation", m.rows[r].activation}, {"proximity", prox}, {"mean_proximity", number_or_null(m.rows[r].mean_proximity)}});
    }
    return {{"d", m.d}, {"order", std::string(to_string(m.order))}, {"n_neurons", m.neurons.size()}, {"neurons", neurons}, {"dropped", dropped}, {"rows", rows}};
}

json table1_json(const experiments::Table1Result& r, const experiments::AnalysisParams& p)
{
    const auto& a = r.aggregate;
    json per = json::array();
    for (const auto& g : r.per_neuron) per.push_back(to_json(g));
    return {{"schema_version", kSchemaVersion},
            {"table", "table1"},
            {"title", "Activation vs. Dimensional Proximity Cross-analysis (Layer 1)"},
            {"params", to_json(p)},
            {"fields",
             {{"n", a.n},
              {"mean_alpha_min", a.mean_alpha_min},
              {"mean_alpha_max", a.mean_alpha_max},
              {"mean_sigma_min", a.mean_s_min},
              {"mean_sigma_max", a.mean_s_max},
              {"mean_delta", a.mean_delta},
              {"pct_delta_pos", a.pct_delta_pos},
              {"p_chi_delta_pos", a.p_chi},
              {"pct_kw_sig", a.pct_kw_sig},
              {"mean_delta_c", a.mean_cliffs}}},
            {"supplementary", {{"pct_mwu_sig", a.pct_mwu_sig}}},
            {"per_neuron", per}};
}

json table2_json(const experiments::TauReport& r, const experiments::AnalysisParams& p)
{
    json fields{{"n", r.n_neurons}};
    json dims = json::array();
    for (std::size_t k = 0; k < r.dims.size(); ++k) {
        const std::string name = "D" + std::to_string(k + 1);
        fields["tau_" + name] = r.dims[k].tau;
        fields["p_tau_" + name] = r.dims[k].p_value;
        dims.push_back({{"dimension", name}, {"tau", r.dims[k].tau}, {"p_value", r.dims[k].p_value}});
    }
    return {{"schema_version", kSchemaVersion},
            {"table", "table2"},
            {"title", "Ordinal correlation between mean activation and mean dimensional proximity (layer 1)"},
            {"params", to_json(p)},
            {"d", r.d},
            {"fields", fields},
            {"dimensions", dims},
            {"mean_neuron", to_json(r.mean)}};
}

json pca_json(const experiments::PcaStructure& r, const experiments::AnalysisParams& p)
{
    json projections = json::array();
    for (const auto& pr : r.projections) {
        json scores = json::array();
        for (double s : pr.scores) scores.push_back(s);
        projections.push_back({{"rank", pr.rank}, {"activation", pr.activation}, {"scores", scores}});
    }
    json circles = json::array();
    circles.push_back({{"kind", "mean"}, {"neuron", nullptr}, {"points", circle_json(r.circle)}});
    json per = json::array();
    for (const auto& n : r.per_neuron) {
        circles.push_back({{"kind", "neuron"}, {"neuron", to_json(n.neuron)}, {"points", circle_json(n.circle)}});
        per.push_back({{"neuron", to_json(n.neuron)}, {"pca", to_json(n.result)}});
    }
    return {{"schema_version", kSchemaVersion},
            {"table", "pca"},
            {"params", to_json(p)},
            {"n", r.n_neurons},
            {"d", r.d},
            {"mean_pca", to_json(r.result)},
            {"circles", circles},
            {"projections", projections},
            {"per_neuron", per},
            {"skipped", r.skipped},
            {"tau_activation_factor1", {{"tau", r.activation_vs_factor1.tau}, {"p_value", r.activation_vs_factor1.p_value}}},
            {"tau_factor1_mean_proximity", {{"tau", r.factor1_vs_mean_proximity.tau}, {"p_value", r.factor1_vs_mean_proximity.p_value}}},
            {"mean_neuron", to_json(r.mean)}};
}

// --- plots -----------------------------------------------------------------------

std::string graph1_svg(const experiments::TauReport& r)
{
    const int panel = 260, margin = 50;
    const int width = margin + static_cast<int>(r.d) * (panel + margin);
    const int height = panel + 2 * margin + 20;
    const auto activation = r.mean.activation_column();
    const Range yr = Range::of(activation);
    std::string s = svg_open(width, height);
    s += text(width / 2.0, 18, "Mean activation against mean dimensional proximity (n = " + std::to_string(r.n_neurons) + ")", "middle", 13);
    for (std::size_t k = 0; k < r.d; ++k) {
        const double x0 = margin + static_cast<double>(k) * (panel + margin), y0 = margin, x1 = x0 + panel, y1 = y0 + panel;
        const auto prox = r.mean.proximity_column(k);
        const Range xr = Range::of(prox);
        const std::string name = "D" + std::to_string(k + 1);
        s += frame(x0, y0, x1, y1, xr, yr, "proximity " + name, "activation");
        s += text((x0 + x1) / 2, y0 - 6, name + ": tau = " + fmt(r.dims[k].tau, 4));
        for (std::size_t i = 0; i < prox.size(); ++i) {
            if (!std::isfinite(prox[i])) continue;
            s += circle(xr.map(prox[i], x0, x1), yr.map(activation[i], y1, y0), 2.5, kPalette[k % 10], " fill-opacity=\"0.8\"");
        }
    }
    return s + "</svg>\n";
}

std::string correlation_circle_svg(const std::vector<pca::CirclePoint>& points, const pca::PcaResult<double>& r, const std::string& title)
{
    const int size = 420;
    const double c = size / 2.0, radius = 160;
    std::string s = svg_open(size, size);
    s += text(c, 20, title, "middle", 13);
    s += "<circle cx=\"" + fmt(c) + "\" cy=\"" + fmt(c) + "\" r=\"" + fmt(radius) + "\" fill=\"none\" stroke=\"#444\"/>\n";
    s += line(c - radius - 10, c, c + radius + 10, c, "#999") + line(c, c - radius - 10, c, c + radius + 10, "#999");
    s += text(c + radius + 4, c - 6, "F1 (" + fmt(100.0 * r.explained_ratio(0), 1) + "%)", "end");
    s += text(c + 6, c - radius - 4, "F2 (" + fmt(100.0 * r.explained_ratio(1), 1) + "%)", "start");
    for (const auto& p : points) {
        const double x = c + p.x * radius, y = c - p.y * radius;
        const char* colour = kPalette[p.variable % 10];
        s += line(c, c, x, y, colour, 1.5);
        s += circle(x, y, 3, colour);
        s += text(x + 6, y - 4, "D" + std::to_string(p.variable + 1), "start");
    }
    return s + "</svg>\n";
}

std::string factor_projection_svg(const experiments::PcaStructure& r)
{
    const int width = 520, height = 460, margin = 60;
    const double x0 = margin, y0 = 40, x1 = width - 100, y1 = height - margin;
    std::vector<double> f1, f2, act;
    for (const auto& p : r.projections) {
        f1.push_back(p.scores.at(0));
        f2.push_back(p.scores.size() > 1 ? p.scores[1] : 0.0);
        act.push_back(p.activation);
    }
    const Range xr = Range::of(f1), yr = Range::of(f2);
    const auto [amin, amax] = std::minmax_element(act.begin(), act.end());
    const double span = std::max(*amax - *amin, 1e-12);
    std::string s = svg_open(width, height);
    s += text(width / 2.0, 20, "Mean tokens on factors 1 and 2, coloured by mean activation", "middle", 13);
    s += frame(x0, y0, x1, y1, xr, yr, "F1 (" + fmt(100.0 * r.result.explained_ratio(0), 1) + "%)",
               "F2 (" + fmt(100.0 * r.result.explained_ratio(1), 1) + "%)");
    for (std::size_t i = 0; i < f1.size(); ++i) {
        s += circle(xr.map(f1[i], x0, x1), yr.map(f2[i], y1, y0), 3, ramp((act[i] - *amin) / span), " stroke=\"#333\" stroke-width=\"0.3\"");
    }
    // activation legend
    for (int i = 0; i <= 10; ++i) {
        const double y = y1 - i * (y1 - y0) / 10.0;
        s += "<rect x=\"" + fmt(x1 + 30) + "\" y=\"" + fmt(y - (y1 - y0) / 10.0) + "\" width=\"16\" height=\"" + fmt((y1 - y0) / 10.0) +
             "\" fill=\"" + ramp(i / 10.0) + "\"/>\n";
    }
    s += text(x1 + 50, y1, fmt(*amin, 2), "start") + text(x1 + 50, y0 + 8, fmt(*amax, 2), "start");
    s += text(x1 + 38, y0 - 8, "activation");
    return s + "</svg>\n";
}

// --- files -----------------------------------------------------------------------

void write_json_file(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

json read_json_file(const fs::path& path)
{
    try {
        return json::parse(slurp(path));
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

json to_json(const Manifest& m)
{
    json files = json::array();
    for (const auto& f : m.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    return {{"schema_version", kSchemaVersion}, {"dataset_checksum", m.dataset_checksum}, {"files", files}};
}

Manifest read_manifest(const fs::path& path)
{
    const json j = read_json_file(path);
    Manifest m;
    try {
        m.dataset_checksum = j.at("dataset_checksum").get<std::string>();
        for (const auto& f : j.at("files")) m.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(), f.at("bytes").get<std::uintmax_t>()});
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": malformed manifest: " + e.what());
    }
    return m;
}

Manifest emit_report(const RunResults& results, const std::string& dataset_checksum, const fs::path& out_dir)
{
    std::error_code ec;
    fs::create_directories(out_dir / "plots", ec);
    if (ec) throw Error("cannot create report directory " + out_dir.string() + ": " + ec.message());

    std::vector<std::pair<std::string, std::string>> files;  // relative path, content
    if (results.table1) files.emplace_back("table1.json", table1_json(*results.table1, results.params).dump(2) + "\n");
    if (results.tau) {
        files.emplace_back("table2.json", table2_json(*results.tau, results.params).dump(2) + "\n");
        files.emplace_back("plots/graph1.svg", graph1_svg(*results.tau));
    }
    if (results.pca) {
        files.emplace_back("pca.json", pca_json(*results.pca, results.params).dump(2) + "\n");
        files.emplace_back("plots/correlation_circle.svg",
                           correlation_circle_svg(results.pca->circle, results.pca->result,
                                                  "Correlation circle, mean neuron (n = " + std::to_string(results.pca->n_neurons) + ")"));
        files.emplace_back("plots/factor_projection.svg", factor_projection_svg(*results.pca));
    }
    std::sort(files.begin(), files.end());

    Manifest manifest;
    manifest.dataset_checksum = dataset_checksum;
    for (const auto& [rel, content] : files) {
        write_text_file(out_dir / rel, content);
        manifest.files.push_back({rel, sha256_bytes(content), content.size()});
    }
    write_json_file(out_dir / "manifest.json", to_json(manifest));
    return manifest;
}

}  // namespace catspace::report
