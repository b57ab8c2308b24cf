#pragma once

#include "damctl/model.hpp"
#include "damctl/solver.hpp"
#include "damctl/trajectory.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace damctl {

/// Turns a grid policy into a feedback control by nearest-node lookup. A
/// floor choice is re-evaluated at the continuous state, so the returned
/// beta is always feasible there.
class GridPolicyAdapter final : public Policy {
public:
    GridPolicyAdapter(const ModelConfig& cfg, const Grid& grid, PolicyField policy);
    Decision decide(const DamState& s) const override;

private:
    ModelConfig cfg_;
    Grid grid_;
    PolicyField policy_;
};

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    long paths = 0;
    long failed = 0;
    long truncated = 0;
    long empty_hit = 0;
};

/// Mean and standard error of the discounted reward over n_paths independent
/// paths; path p draws from stream_seed(seed, p). The reduction runs in path
/// order, so the result does not depend on the thread count.
McEstimate mc_value(const ModelConfig& cfg, const Policy& policy, const DamState& x0, long n_paths,
                    std::uint64_t seed, int threads = 0, std::vector<RewardAccumulator>* paths = nullptr);

struct SweepEntry {
    double c = 0.0;
    bool converged = false;
    std::string error;
    long iterations = 0;
    double residual = 0.0;
    std::array<std::vector<double>, 2> thresholds;
    /// [regime][probe] -> value along the h nodes at the probe's nearest ell node
    std::array<std::vector<std::vector<double>>, 2> probe_values;
};

struct SweepResult {
    std::vector<double> h_nodes;
    std::vector<double> ell_nodes;
    std::vector<double> probe_ells;
    std::vector<SweepEntry> entries;  ///< sorted by increasing c
};

/// Re-solves the problem for every self-excitation coefficient in c_list
/// (all else fixed). A solve that fails to converge is recorded, not fatal.
SweepResult sweep_c(const ModelConfig& cfg, std::vector<double> c_list, const std::vector<double>& probe_ells,
                    const SolveOptions& opts);

struct MonotonicityVerdict {
    int il;
    double ell;
    bool nonincreasing;
    double worst_increase;  ///< largest rise above the running minimum (0 when none)
};

/// For each ell node: is h*(ell; c) nonincreasing in c, up to `slack`?
std::vector<MonotonicityVerdict> threshold_monotonicity_in_c(const SweepResult& sweep, Regime i, double slack);

/// Verdict summary over one third of the ell grid.
struct BandVerdict {
    std::string band;  ///< "low", "middle" or "high"
    Regime regime;
    double ell_lo;
    double ell_hi;
    int nodes;
    int nonincreasing_nodes;
    double worst_increase;
};

/// Splits the ell nodes into thirds and summarises threshold_monotonicity_in_c per band and regime.
std::vector<BandVerdict> band_verdicts(const SweepResult& sweep, double slack);

/// Largest rise of a sequence above its running minimum; +inf entries
/// (no threshold) following a finite one count as an infinite rise.
double worst_increase(const std::vector<double>& seq);

struct PolicyReport {
    std::array<long, 2> switch_nodes{};         ///< interior nodes taking the obstacle branch
    std::array<long, 2> beta_max_nodes{};
    long interior_nodes = 0;
    double bang_bang_fraction = 0.0;            ///< nodes whose beta is the floor or beta_max
    std::array<std::vector<double>, 2> thresholds;
    std::array<double, 2> threshold_worst_rise_in_ell{};
    std::array<long, 2> spill_below_h_minus{};  ///< interior nodes with h < h_minus and beta_max
    bool mutual_switching = false;              ///< both regimes switching at one node
    // shape diagnostics of the value functions
    std::array<double, 2> fraction_increasing_in_h{};
    std::array<double, 2> fraction_increasing_in_ell{};
};

PolicyReport policy_report(const ModelConfig& cfg, const Grid& grid, const ValueField& value,
                           const PolicyField& policy);

struct ProbeState {
    double h;
    double ell;
    Regime regime;
};

struct ProbeCheck {
    ProbeState probe;      ///< snapped to the nearest node
    double solver_value;
    double refined_gap;    ///< |coarse - refined| solver value at the node
    double c_disc;         ///< Richardson estimate of the coarse error, 2 * refined_gap
    McEstimate own;
    McEstimate baseline;   ///< floor spill, never switch
    bool consistent;       ///< |solver - own| <= 3 SE + c_disc
    bool dominates;        ///< own >= baseline - 2 combined SE
};

/// Cross-checks a solved policy by simulation at probe states.
std::vector<ProbeCheck> validate_policy(const ModelConfig& cfg, const Grid& grid, const ValueField& value,
                                        const PolicyField& policy, const Grid& refined_grid,
                                        const ValueField& refined_value, const std::vector<ProbeState>& probes,
                                        long n_paths, std::uint64_t seed, int threads = 0);

} // namespace damctl
