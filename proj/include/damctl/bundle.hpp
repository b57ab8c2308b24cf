#pragma once

#include "damctl/analysis.hpp"
#include "damctl/model.hpp"
#include "damctl/solver.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace damctl {

/// Everything needed to inspect, re-verify or replay a solve.
struct ResultBundle {
    ModelConfig config;
    ValueField value;
    PolicyField policy;
    std::array<std::vector<double>, 2> thresholds;
    long iterations = 0;
    double residual = 0.0;
    double tol = 0.0;
    std::optional<std::uint64_t> seed;
    double wall_time = 0.0;
    int threads = 1;

    Grid grid() const { return Grid(config); }
};

ResultBundle make_bundle(const ModelConfig& cfg, const SolveResult& res, double tol, int threads);

/// Writes `h,ell,value` rows (h outer, ell inner) with 17 significant digits.
void export_grid(const Grid& grid, const std::vector<double>& field, const std::string& path);

/// Reads a file written by export_grid; the coordinates must match `grid` exactly.
std::vector<double> import_grid(const Grid& grid, const std::string& path);

enum class BundleFormat { Csv, Json };

/// Csv: a directory holding config.used, v0.csv, v1.csv, policy{0,1}.csv,
/// threshold{0,1}.csv, metadata.json and timing.json. Only timing.json
/// (wall time, thread count) varies between repeated runs.
/// Json: a single bundle.json document inside the directory.
void write_bundle(const ResultBundle& bundle, const std::string& dir, BundleFormat format = BundleFormat::Csv);

/// Reads either layout, preferring the CSV files when both are present.
ResultBundle read_bundle(const std::string& dir);

/// Writes sweep.csv (c, ell, h_star0, h_star1), verdict.csv (per ell node),
/// probes.csv (value columns at the probe intensities), metadata.json and
/// timing.json into dir.
void write_sweep(const SweepResult& sweep, const ModelConfig& cfg, const std::string& dir, double wall_time);

/// One line per band and regime, e.g.
/// "regime 0 middle ell in [1.0067, 2.0033]: nonincreasing in c at 33/33 nodes (worst rise 0)".
std::vector<std::string> verdict_lines(const SweepResult& sweep, double slack);

/// JSON summary of a bundle: policy report fields plus the stored and the
/// recomputed residual.
std::string report_json(const ResultBundle& bundle, const PolicyReport& report, double recomputed_residual);

} // namespace damctl
