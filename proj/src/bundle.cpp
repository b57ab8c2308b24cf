#include "damctl/bundle.hpp"

#include "damctl/config.hpp"
#include "damctl/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace damctl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(path.string(), "cannot open for writing");
    f << text;
    if (!f) throw IoError(path.string(), "write failed");
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(path.string(), "cannot open for reading");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string& s, const std::string& path) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError(path, "malformed number '" + s + "'");
    return v;
}

/// Data rows of a CSV with the expected header.
std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != header)
        throw IoError(path.string(), "expected header '" + header + "'");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(split(line));
    return rows;
}

void check_coordinates(const Grid& g, const std::vector<std::vector<std::string>>& rows, const std::string& path) {
    if (rows.size() != g.size())
        throw IoError(path, "expected " + std::to_string(g.size()) + " rows, found " + std::to_string(rows.size()));
    for (int ih = 0; ih < g.nh(); ++ih)
        for (int il = 0; il < g.nl(); ++il) {
            const auto& r = rows[g.index(ih, il)];
            if (parse_double(r.at(0), path) != g.h(ih) || parse_double(r.at(1), path) != g.ell(il))
                throw IoError(path, "row " + std::to_string(g.index(ih, il) + 2) + " does not match the grid");
        }
}

std::string policy_csv(const ModelConfig& cfg, const Grid& g, const PolicyField& p, Regime i) {
    std::string out = "h,ell,switch,choice,beta\n";
    const int r = index_of(i);
    for (int ih = 0; ih < g.nh(); ++ih)
        for (int il = 0; il < g.nl(); ++il) {
            const std::size_t n = g.index(ih, il);
            const BetaChoice ch = p.beta[r][n];
            out += format_double(g.h(ih)) + "," + format_double(g.ell(il)) + "," +
                   std::to_string(p.switch_regime[r][n]) + "," + (ch == BetaChoice::Max ? "max" : "floor") + "," +
                   format_double(beta_value(cfg, ch, i, g.h(ih), g.ell(il))) + "\n";
        }
    return out;
}

std::string threshold_csv(const Grid& g, const std::vector<double>& t) {
    std::string out = "ell,h_star\n";
    for (int il = 0; il < g.nl(); ++il) out += format_double(g.ell(il)) + "," + format_double(t[il]) + "\n";
    return out;
}

json metadata(const ResultBundle& b) {
    const Grid g = b.grid();
    json m;
    m["format_version"] = kFormatVersion;
    m["config_hash"] = hash_hex(config_hash(b.config));
    m["seed"] = b.seed ? json(*b.seed) : json(nullptr);
    m["iterations"] = b.iterations;
    m["residual"] = b.residual;
    m["tol"] = b.tol;
    m["nh"] = g.nh();
    m["nl"] = g.nl();
    return m;
}

void read_metadata(const json& m, ResultBundle& b, const std::string& where) {
    if (m.value("format_version", 0) != kFormatVersion) throw IoError(where, "unsupported bundle format version");
    b.iterations = m.at("iterations").get<long>();
    b.residual = m.at("residual").get<double>();
    b.tol = m.at("tol").get<double>();
    if (!m.at("seed").is_null()) b.seed = m.at("seed").get<std::uint64_t>();
    if (m.at("config_hash").get<std::string>() != hash_hex(config_hash(b.config)))
        throw IoError(where, "config hash does not match config.used");
}

json threshold_json(const std::vector<double>& t) {
    json a = json::array();
    for (double x : t) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
    return a;
}

std::vector<double> threshold_from_json(const json& a) {
    std::vector<double> t;
    for (const auto& x : a) t.push_back(x.is_null() ? std::numeric_limits<double>::infinity() : x.get<double>());
    return t;
}

} // namespace

ResultBundle make_bundle(const ModelConfig& cfg, const SolveResult& res, double tol, int threads) {
    ResultBundle b;
    b.config = cfg;
    b.value = res.value;
    b.policy = res.policy;
    const Grid g(cfg);
    b.thresholds = {extract_threshold(res.policy, g, Regime::Closed), extract_threshold(res.policy, g, Regime::Operating)};
    b.iterations = res.iterations;
    b.residual = res.residual;
    b.tol = tol;
    b.wall_time = res.wall_time;
    b.threads = threads;
    return b;
}

void export_grid(const Grid& grid, const std::vector<double>& field, const std::string& path) {
    if (field.size() != grid.size()) throw std::invalid_argument("export_grid: field size does not match grid");
    std::string out = "h,ell,value\n";
    out.reserve(grid.size() * 64);
    for (int ih = 0; ih < grid.nh(); ++ih)
        for (int il = 0; il < grid.nl(); ++il)
            out += format_double(grid.h(ih)) + "," + format_double(grid.ell(il)) + "," +
                   format_double(field[grid.index(ih, il)]) + "\n";
    write_file(path, out);
}

std::vector<double> import_grid(const Grid& grid, const std::string& path) {
    const auto rows = read_csv(path, "h,ell,value");
    check_coordinates(grid, rows, path);
    std::vector<double> field(grid.size());
    for (std::size_t n = 0; n < rows.size(); ++n) field[n] = parse_double(rows[n].at(2), path);
    return field;
}

void write_bundle(const ResultBundle& b, const std::string& dir, BundleFormat format) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir, "cannot create directory: " + ec.message());
    const fs::path root(dir);
    const Grid g = b.grid();

    json timing;
    timing["wall_time_s"] = b.wall_time;
    timing["threads"] = b.threads;

    if (format == BundleFormat::Json) {
        json doc;
        doc["metadata"] = metadata(b);
        doc["config"] = serialize_config(b.config);
        for (int r = 0; r < 2; ++r) {
            const std::string s = std::to_string(r);
            doc["v" + s] = b.value.v[r];
            std::vector<int> sw(b.policy.switch_regime[r].begin(), b.policy.switch_regime[r].end());
            std::vector<int> ch;
            for (auto c : b.policy.beta[r]) ch.push_back(static_cast<int>(c));
            doc["switch" + s] = sw;
            doc["choice" + s] = ch;
            doc["threshold" + s] = threshold_json(b.thresholds[r]);
        }
        doc["timing"] = timing;
        write_file(root / "bundle.json", doc.dump(1) + "\n");
        return;
    }

    write_file(root / "config.used", serialize_config(b.config));
    for (int r = 0; r < 2; ++r) {
        const std::string s = std::to_string(r);
        export_grid(g, b.value.v[r], (root / ("v" + s + ".csv")).string());
        write_file(root / ("policy" + s + ".csv"), policy_csv(b.config, g, b.policy, regime_from_index(r)));
        write_file(root / ("threshold" + s + ".csv"), threshold_csv(g, b.thresholds[r]));
    }
    write_file(root / "metadata.json", metadata(b).dump(2) + "\n");
    write_file(root / "timing.json", timing.dump(2) + "\n");
}

ResultBundle read_bundle(const std::string& dir) {
    const fs::path root(dir);
    ResultBundle b;
    if (!fs::exists(root / "metadata.json") && fs::exists(root / "bundle.json")) {
        const std::string where = (root / "bundle.json").string();
        json doc;
        try {
            doc = json::parse(read_file(root / "bundle.json"));
            b.config = parse_config(doc.at("config").get<std::string>(), where).config;
            read_metadata(doc.at("metadata"), b, where);
            const std::size_t n = b.grid().size();
            b.value = ValueField(n, 0.0);
            b.policy = PolicyField(n);
            for (int r = 0; r < 2; ++r) {
                const std::string s = std::to_string(r);
                b.value.v[r] = doc.at("v" + s).get<std::vector<double>>();
                const auto sw = doc.at("switch" + s).get<std::vector<int>>();
                const auto ch = doc.at("choice" + s).get<std::vector<int>>();
                if (b.value.v[r].size() != n || sw.size() != n || ch.size() != n)
                    throw IoError(where, "field size does not match the grid");
                for (std::size_t i = 0; i < n; ++i) {
                    b.policy.switch_regime[r][i] = static_cast<std::uint8_t>(sw[i]);
                    b.policy.beta[r][i] = static_cast<BetaChoice>(ch[i]);
                }
                b.thresholds[r] = threshold_from_json(doc.at("threshold" + s));
            }
            b.wall_time = doc.at("timing").value("wall_time_s", 0.0);
            b.threads = doc.at("timing").value("threads", 1);
        } catch (const json::exception& e) {
            throw IoError(where, std::string("malformed bundle: ") + e.what());
        }
        return b;
    }

    b.config = parse_config(read_file(root / "config.used"), (root / "config.used").string()).config;
    const Grid g = b.grid();
    b.value = ValueField(g.size(), 0.0);
    b.policy = PolicyField(g.size());
    for (int r = 0; r < 2; ++r) {
        const std::string s = std::to_string(r);
        b.value.v[r] = import_grid(g, (root / ("v" + s + ".csv")).string());

        const std::string ppath = (root / ("policy" + s + ".csv")).string();
        const auto rows = read_csv(ppath, "h,ell,switch,choice,beta");
        check_coordinates(g, rows, ppath);
        for (std::size_t n = 0; n < rows.size(); ++n) {
            const auto& row = rows[n];
            if (row.size() != 5 || (row[2] != "0" && row[2] != "1") || (row[3] != "floor" && row[3] != "max"))
                throw IoError(ppath, "malformed policy row " + std::to_string(n + 2));
            b.policy.switch_regime[r][n] = row[2] == "1";
            b.policy.beta[r][n] = row[3] == "max" ? BetaChoice::Max : BetaChoice::Floor;
        }

        const std::string tpath = (root / ("threshold" + s + ".csv")).string();
        const auto trows = read_csv(tpath, "ell,h_star");
        if (trows.size() != static_cast<std::size_t>(g.nl())) throw IoError(tpath, "wrong number of rows");
        for (const auto& row : trows) b.thresholds[r].push_back(parse_double(row.at(1), tpath));
    }
    try {
        read_metadata(json::parse(read_file(root / "metadata.json")), b, (root / "metadata.json").string());
        if (fs::exists(root / "timing.json")) {
            const json t = json::parse(read_file(root / "timing.json"));
            b.wall_time = t.value("wall_time_s", 0.0);
            b.threads = t.value("threads", 1);
        }
    } catch (const json::exception& e) {
        throw IoError((root / "metadata.json").string(), std::string("malformed metadata: ") + e.what());
    }
    return b;
}

void write_sweep(const SweepResult& sweep, const ModelConfig& cfg, const std::string& dir, double wall_time) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir, "cannot create directory: " + ec.message());
    const fs::path root(dir);

    std::string thresholds = "c,ell,h_star0,h_star1\n";
    std::string probes = "c,regime,probe_ell,h,value\n";
    json meta;
    meta["format_version"] = kFormatVersion;
    meta["config_hash"] = hash_hex(config_hash(cfg));
    meta["probe_ells"] = sweep.probe_ells;
    json runs = json::array();
    for (const auto& e : sweep.entries) {
        json run;
        run["c"] = e.c;
        run["converged"] = e.converged;
        run["iterations"] = e.iterations;
        run["residual"] = e.residual;
        if (!e.error.empty()) run["error"] = e.error;
        runs.push_back(run);
        if (!e.converged) continue;
        for (std::size_t il = 0; il < sweep.ell_nodes.size(); ++il)
            thresholds += format_double(e.c) + "," + format_double(sweep.ell_nodes[il]) + "," +
                          format_double(e.thresholds[0][il]) + "," + format_double(e.thresholds[1][il]) + "\n";
        for (int r = 0; r < 2; ++r)
            for (std::size_t p = 0; p < sweep.probe_ells.size(); ++p)
                for (std::size_t ih = 0; ih < sweep.h_nodes.size(); ++ih)
                    probes += format_double(e.c) + "," + std::to_string(r) + "," + format_double(sweep.probe_ells[p]) +
                              "," + format_double(sweep.h_nodes[ih]) + "," + format_double(e.probe_values[r][p][ih]) +
                              "\n";
    }
    meta["runs"] = runs;

    const Grid g(cfg);
    std::string verdict = "ell,nonincreasing0,worst_rise0,nonincreasing1,worst_rise1\n";
    const auto v0 = threshold_monotonicity_in_c(sweep, Regime::Closed, g.j());
    const auto v1 = threshold_monotonicity_in_c(sweep, Regime::Operating, g.j());
    for (std::size_t il = 0; il < v0.size(); ++il)
        verdict += format_double(v0[il].ell) + "," + std::to_string(v0[il].nonincreasing) + "," +
                   format_double(v0[il].worst_increase) + "," + std::to_string(v1[il].nonincreasing) + "," +
                   format_double(v1[il].worst_increase) + "\n";

    json timing;
    timing["wall_time_s"] = wall_time;

    write_file(root / "config.used", serialize_config(cfg));
    write_file(root / "sweep.csv", thresholds);
    write_file(root / "probes.csv", probes);
    write_file(root / "verdict.csv", verdict);
    write_file(root / "metadata.json", meta.dump(2) + "\n");
    write_file(root / "timing.json", timing.dump(2) + "\n");
}

std::vector<std::string> verdict_lines(const SweepResult& sweep, double slack) {
    std::vector<std::string> out;
    for (const auto& b : band_verdicts(sweep, slack)) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "regime %d %s ell in [%.6g, %.6g]: nonincreasing in c at %d/%d nodes (worst rise %.6g)",
                      index_of(b.regime), b.band.c_str(), b.ell_lo, b.ell_hi, b.nonincreasing_nodes, b.nodes,
                      b.worst_increase);
        out.emplace_back(buf);
    }
    return out;
}

std::string report_json(const ResultBundle& bundle, const PolicyReport& rep, double recomputed_residual) {
    json j;
    j["config_hash"] = hash_hex(config_hash(bundle.config));
    j["iterations"] = bundle.iterations;
    j["stored_residual"] = bundle.residual;
    j["recomputed_residual"] = recomputed_residual;
    j["residual_match"] = std::abs(recomputed_residual - bundle.residual) <= 1e-12;
    j["interior_nodes"] = rep.interior_nodes;
    j["switch_nodes"] = {{"regime0_open", rep.switch_nodes[0]}, {"regime1_close", rep.switch_nodes[1]}};
    j["close_region_empty"] = rep.switch_nodes[1] == 0;
    j["mutual_switching"] = rep.mutual_switching;
    j["bang_bang_fraction"] = rep.bang_bang_fraction;
    j["beta_max_nodes"] = {rep.beta_max_nodes[0], rep.beta_max_nodes[1]};
    j["spill_below_h_minus"] = {rep.spill_below_h_minus[0], rep.spill_below_h_minus[1]};
    j["threshold_worst_rise_in_ell"] = {rep.threshold_worst_rise_in_ell[0], rep.threshold_worst_rise_in_ell[1]};
    j["thresholds"] = {threshold_json(rep.thresholds[0]), threshold_json(rep.thresholds[1])};
    j["value_shape"] = {{"fraction_increasing_in_h", {rep.fraction_increasing_in_h[0], rep.fraction_increasing_in_h[1]}},
                        {"fraction_increasing_in_ell",
                         {rep.fraction_increasing_in_ell[0], rep.fraction_increasing_in_ell[1]}}};
    return j.dump(2);
}

} // namespace damctl
