#include "damctl/analysis.hpp"

#include "damctl/error.hpp"
#include "damctl/parallel.hpp"
#include "damctl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace damctl {

GridPolicyAdapter::GridPolicyAdapter(const ModelConfig& cfg, const Grid& grid, PolicyField policy)
    : cfg_(cfg), grid_(grid), policy_(std::move(policy)) {
    if (policy_.beta[0].size() != grid.size()) throw std::invalid_argument("GridPolicyAdapter: policy/grid mismatch");
}

Decision GridPolicyAdapter::decide(const DamState& s) const {
    const std::size_t node = grid_.index(grid_.nearest_h(s.h), grid_.nearest_ell(s.lambda));
    const bool sw = policy_.switch_regime[index_of(s.regime)][node] != 0;
    const Regime next = sw ? other(s.regime) : s.regime;
    const BetaChoice choice = policy_.beta[index_of(next)][node];
    return {sw, beta_value(cfg_, choice, next, s.h, s.lambda)};
}

McEstimate mc_value(const ModelConfig& cfg, const Policy& policy, const DamState& x0, long n_paths,
                    std::uint64_t seed, int threads, std::vector<RewardAccumulator>* paths) {
    if (n_paths < 100) throw std::invalid_argument("mc_value: n_paths must be >= 100");
    std::vector<RewardAccumulator> acc(n_paths);
    const int workers = threads > 0 ? threads : worker_count();
    parallel_blocks(static_cast<std::size_t>(n_paths), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            Rng rng(stream_seed(seed, p));
            acc[p] = simulate_controlled(cfg, policy, x0, rng, cfg.simulation.t_cut);
        }
    });

    // Welford in path order: deterministic, and exact for constant samples.
    McEstimate out;
    double mean = 0.0;
    double m2 = 0.0;
    for (long p = 0; p < n_paths; ++p) {
        const double x = acc[p].total();
        const double d = x - mean;
        mean += d / (p + 1);
        m2 += d * (x - mean);
        out.failed += acc[p].failed;
        out.truncated += acc[p].truncated;
        out.empty_hit += acc[p].empty_hit;
    }
    out.paths = n_paths;
    out.estimate = mean;
    out.std_error = std::sqrt(m2 / (n_paths - 1) / n_paths);
    if (paths) *paths = std::move(acc);
    return out;
}

SweepResult sweep_c(const ModelConfig& cfg, std::vector<double> c_list, const std::vector<double>& probe_ells,
                    const SolveOptions& opts) {
    if (c_list.empty()) throw std::invalid_argument("sweep_c: empty c list");
    for (double c : c_list)
        if (!(c > 0.0)) throw std::invalid_argument("sweep_c: c values must be positive");
    std::sort(c_list.begin(), c_list.end());

    const Grid grid(cfg);
    SweepResult out;
    for (int ih = 0; ih < grid.nh(); ++ih) out.h_nodes.push_back(grid.h(ih));
    for (int il = 0; il < grid.nl(); ++il) out.ell_nodes.push_back(grid.ell(il));
    out.probe_ells = probe_ells;

    for (double c : c_list) {
        ModelConfig local = cfg;
        local.c = c;
        SweepEntry e;
        e.c = c;
        try {
            validate(local);
            const SolveResult res = solve(local, grid, opts);
            e.converged = true;
            e.iterations = res.iterations;
            e.residual = res.residual;
            for (int r = 0; r < 2; ++r) {
                e.thresholds[r] = extract_threshold(res.policy, grid, regime_from_index(r));
                for (double ell : probe_ells) {
                    const int il = grid.nearest_ell(ell);
                    std::vector<double> column;
                    for (int ih = 0; ih < grid.nh(); ++ih) column.push_back(res.value.v[r][grid.index(ih, il)]);
                    e.probe_values[r].push_back(std::move(column));
                }
            }
        } catch (const NonConvergenceError& err) {
            e.error = err.what();
            e.residual = err.last_residual();
        } catch (const ConfigError& err) {
            e.error = err.what();
        }
        out.entries.push_back(std::move(e));
    }
    return out;
}

double worst_increase(const std::vector<double>& seq) {
    double running_min = std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (double x : seq) {
        if (x > running_min) worst = std::max(worst, x - running_min);
        running_min = std::min(running_min, x);
    }
    return worst;
}

std::vector<MonotonicityVerdict> threshold_monotonicity_in_c(const SweepResult& sweep, Regime i, double slack) {
    std::vector<MonotonicityVerdict> out;
    for (std::size_t il = 0; il < sweep.ell_nodes.size(); ++il) {
        std::vector<double> seq;
        bool complete = true;
        for (const auto& e : sweep.entries) {
            if (!e.converged) {
                complete = false;
                continue;
            }
            seq.push_back(e.thresholds[index_of(i)][il]);
        }
        const double rise = worst_increase(seq);
        out.push_back({static_cast<int>(il), sweep.ell_nodes[il], complete && rise <= slack + 1e-9, rise});
    }
    return out;
}

std::vector<BandVerdict> band_verdicts(const SweepResult& sweep, double slack) {
    std::vector<BandVerdict> out;
    const int nl = static_cast<int>(sweep.ell_nodes.size());
    const char* names[3] = {"low", "middle", "high"};
    for (int r = 0; r < 2; ++r) {
        const auto verdicts = threshold_monotonicity_in_c(sweep, regime_from_index(r), slack);
        for (int band = 0; band < 3; ++band) {
            const int lo = nl * band / 3;
            const int hi = nl * (band + 1) / 3;
            if (hi <= lo) continue;
            BandVerdict b{names[band], regime_from_index(r), sweep.ell_nodes[lo], sweep.ell_nodes[hi - 1], hi - lo, 0, 0.0};
            for (int il = lo; il < hi; ++il) {
                b.nonincreasing_nodes += verdicts[il].nonincreasing;
                b.worst_increase = std::max(b.worst_increase, verdicts[il].worst_increase);
            }
            out.push_back(b);
        }
    }
    return out;
}

PolicyReport policy_report(const ModelConfig& cfg, const Grid& grid, const ValueField& value,
                           const PolicyField& policy) {
    PolicyReport rep;
    const int top = grid.nh() - 1;
    long bang_bang = 0;
    for (int ih = 0; ih < top; ++ih)
        for (int il = 0; il < grid.nl(); ++il) {
            const std::size_t n = grid.index(ih, il);
            const double h = grid.h(ih);
            const double ell = grid.ell(il);
            ++rep.interior_nodes;
            if (policy.switch_regime[0][n] && policy.switch_regime[1][n]) rep.mutual_switching = true;
            for (int r = 0; r < 2; ++r) {
                const Regime reg = regime_from_index(r);
                rep.switch_nodes[r] += policy.switch_regime[r][n];
                const bool is_max = policy.beta[r][n] == BetaChoice::Max;
                rep.beta_max_nodes[r] += is_max;
                if (is_max && h < cfg.h_minus) ++rep.spill_below_h_minus[r];
                const double beta = beta_value(cfg, policy.beta[r][n], reg, h, ell);
                if (beta == cfg.beta_max || beta == beta_floor(cfg, reg, h, ell)) ++bang_bang;
            }
        }
    rep.bang_bang_fraction = static_cast<double>(bang_bang) / (2.0 * rep.interior_nodes);

    for (int r = 0; r < 2; ++r) {
        rep.thresholds[r] = extract_threshold(policy, grid, regime_from_index(r));
        rep.threshold_worst_rise_in_ell[r] = worst_increase(rep.thresholds[r]);

        const auto& v = value.v[r];
        long inc_h = 0, pairs_h = 0, inc_l = 0, pairs_l = 0;
        for (int ih = 0; ih < top; ++ih)
            for (int il = 0; il < grid.nl(); ++il) {
                if (ih + 1 < top) {
                    ++pairs_h;
                    inc_h += v[grid.index(ih + 1, il)] >= v[grid.index(ih, il)];
                }
                if (il + 1 < grid.nl()) {
                    ++pairs_l;
                    inc_l += v[grid.index(ih, il + 1)] >= v[grid.index(ih, il)];
                }
            }
        rep.fraction_increasing_in_h[r] = pairs_h ? static_cast<double>(inc_h) / pairs_h : 0.0;
        rep.fraction_increasing_in_ell[r] = pairs_l ? static_cast<double>(inc_l) / pairs_l : 0.0;
    }
    return rep;
}

std::vector<ProbeCheck> validate_policy(const ModelConfig& cfg, const Grid& grid, const ValueField& value,
                                        const PolicyField& policy, const Grid& refined_grid,
                                        const ValueField& refined_value, const std::vector<ProbeState>& probes,
                                        long n_paths, std::uint64_t seed, int threads) {
    const GridPolicyAdapter own(cfg, grid, policy);
    const FloorPolicy baseline(cfg);
    std::vector<ProbeCheck> out;
    for (std::size_t p = 0; p < probes.size(); ++p) {
        const int ih = grid.nearest_h(probes[p].h);
        const int il = grid.nearest_ell(probes[p].ell);
        const int r = index_of(probes[p].regime);
        ProbeCheck chk{};
        chk.probe = {grid.h(ih), grid.ell(il), probes[p].regime};
        chk.solver_value = value.v[r][grid.index(ih, il)];
        const std::size_t fine = refined_grid.index(refined_grid.nearest_h(chk.probe.h),
                                                    refined_grid.nearest_ell(chk.probe.ell));
        chk.refined_gap = std::abs(refined_value.v[r][fine] - chk.solver_value);
        // first-order scheme: the coarse error is twice the halving gap
        chk.c_disc = 2.0 * chk.refined_gap;

        const DamState x0{chk.probe.h, std::max(chk.probe.ell, cfg.b), chk.probe.regime, 0.0, false};
        // common random numbers across the two policies
        const std::uint64_t probe_seed = stream_seed(seed, 1000003ULL * (p + 1));
        chk.own = mc_value(cfg, own, x0, n_paths, probe_seed, threads);
        chk.baseline = mc_value(cfg, baseline, x0, n_paths, probe_seed, threads);
        chk.consistent = std::abs(chk.solver_value - chk.own.estimate) <= 3.0 * chk.own.std_error + chk.c_disc;
        const double combined = std::sqrt(chk.own.std_error * chk.own.std_error +
                                          chk.baseline.std_error * chk.baseline.std_error);
        chk.dominates = chk.own.estimate >= chk.baseline.estimate - 2.0 * combined;
        out.push_back(chk);
    }
    return out;
}

} // namespace damctl
