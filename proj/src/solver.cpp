#include "damctl/solver.hpp"

#include "damctl/error.hpp"
#include "damctl/parallel.hpp"

#include <algorithm>
#include <barrier>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace damctl {

Grid::Grid(int nh, int nl, double h_min, double h_max, double ell_min, double ell_max)
    : nh_(nh), nl_(nl), h_min_(h_min), h_max_(h_max), ell_min_(ell_min), ell_max_(ell_max) {
    if (nh < 2 || nl < 2) throw std::invalid_argument("Grid: need at least 2 nodes per axis");
    if (!(h_max > h_min) || !(ell_max > ell_min)) throw std::invalid_argument("Grid: empty range");
    j_ = (h_max - h_min) / (nh - 1);
    k_ = (ell_max - ell_min) / (nl - 1);
}

Grid::Grid(const ModelConfig& cfg)
    : Grid(cfg.grid.nh, cfg.grid.nl, cfg.h_min, cfg.h_max, cfg.grid.ell_min, cfg.grid.ell_max) {}

int Grid::nearest_h(double h) const noexcept {
    const double f = std::round((h - h_min_) / j_);
    return static_cast<int>(std::clamp(f, 0.0, static_cast<double>(nh_ - 1)));
}

int Grid::nearest_ell(double ell) const noexcept {
    const double f = std::round((ell - ell_min_) / k_);
    return static_cast<int>(std::clamp(f, 0.0, static_cast<double>(nl_ - 1)));
}

double beta_value(const ModelConfig& cfg, BetaChoice choice, Regime i, double h, double ell) {
    return choice == BetaChoice::Max ? cfg.beta_max : beta_floor(cfg, i, h, ell);
}

DriftCoefficients drift_coefficients(const ModelConfig& cfg, Regime i, double h, double ell, double beta) {
    const double turbine = i == Regime::Operating ? phi(cfg, h) : 0.0;
    return {-turbine - spill_rate(cfg, beta, h), cfg.a * (cfg.b - ell)};
}

StencilTarget interpolation_target(const Grid& grid, double h, double ell) {
    const double fh = (std::clamp(h, grid.h_min(), grid.h_max()) - grid.h_min()) / grid.j();
    const double fl = (std::clamp(ell, grid.ell_min(), grid.ell_max()) - grid.ell_min()) / grid.k();
    const int ih = std::clamp(static_cast<int>(std::floor(fh)), 0, grid.nh() - 2);
    const int il = std::clamp(static_cast<int>(std::floor(fl)), 0, grid.nl() - 2);
    const double th = std::clamp(fh - ih, 0.0, 1.0);
    const double tl = std::clamp(fl - il, 0.0, 1.0);

    StencilTarget t;
    t.count = 4;
    t.node = {grid.index(ih, il), grid.index(ih + 1, il), grid.index(ih, il + 1), grid.index(ih + 1, il + 1)};
    t.weight = {(1 - th) * (1 - tl), th * (1 - tl), (1 - th) * tl, th * tl};
    return t;
}

namespace {

StencilTarget single(std::size_t node) {
    StencilTarget t;
    t.count = 1;
    t.node[0] = node;
    t.weight[0] = 1.0;
    return t;
}

// Upwind neighbours y1..y4. Out-of-grid indices fall on the ghost layer, whose
// zero-gradient values are those of the adjacent node, so they clamp.
std::array<std::size_t, 4> upwind_nodes(const Grid& g, int ih, int il) {
    return {g.index(std::min(ih + 1, g.nh() - 1), il), g.index(ih, std::min(il + 1, g.nl() - 1)),
            g.index(std::max(ih - 1, 0), il), g.index(ih, std::max(il - 1, 0))};
}

} // namespace

TransitionStencil build_stencil(const ModelConfig& cfg, const Grid& grid, Regime i, int ih, int il, double beta) {
    const double h = grid.h(ih);
    const double ell = grid.ell(il);
    const double j = grid.j();
    const double k = grid.k();
    const auto [mu_h, mu_ell] = drift_coefficients(cfg, i, h, ell, beta);

    const double q = std::abs(mu_h) * k + std::abs(mu_ell) * j + j * k * ell;
    if (!(q > 0.0)) throw DomainError("build_stencil: degenerate normalisation Q = 0");

    TransitionStencil s;
    s.q = q;
    s.dt = j * k / q;
    const auto up = upwind_nodes(grid, ih, il);
    for (std::size_t m = 0; m < 4; ++m) s.targets.push_back(single(up[m]));
    s.probs = {k * std::max(mu_h, 0.0) / q, j * std::max(mu_ell, 0.0) / q, k * std::max(-mu_h, 0.0) / q,
               j * std::max(-mu_ell, 0.0) / q};
    for (std::size_t m = 0; m < cfg.marks.size(); ++m) {
        const double z = cfg.marks.values[m];
        s.targets.push_back(interpolation_target(grid, std::min(grid.h_max(), h + z),
                                                 std::min(grid.ell_max(), ell + cfg.c * z)));
        s.probs.push_back(j * k * ell * cfg.marks.probs[m] / q);
    }
    return s;
}

BellmanOperator::BellmanOperator(const ModelConfig& cfg, const Grid& grid)
    : cfg_(cfg), grid_(grid), corners_per_node_(4 * cfg.marks.size()),
      min_dt_(std::numeric_limits<double>::infinity()) {
    const std::size_t n = grid.size();
    if (n > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("BellmanOperator: grid too large");
    neighbours_.resize(n);
    coeffs_.resize(n * 4);
    jumps_.resize(n * corners_per_node_);

    const double j = grid.j();
    const double k = grid.k();
    for (int ih = 0; ih < grid.nh(); ++ih) {
        const double h = grid.h(ih);
        for (int il = 0; il < grid.nl(); ++il) {
            const double ell = grid.ell(il);
            const std::size_t node = grid.index(ih, il);
            const auto up = upwind_nodes(grid, ih, il);
            for (int m = 0; m < 4; ++m) neighbours_[node][m] = static_cast<std::uint32_t>(up[m]);

            for (std::size_t m = 0; m < cfg.marks.size(); ++m) {
                const double z = cfg.marks.values[m];
                const auto t = interpolation_target(grid, std::min(grid.h_max(), h + z),
                                                    std::min(grid.ell_max(), ell + cfg.c * z));
                for (int c = 0; c < 4; ++c)
                    jumps_[node * corners_per_node_ + 4 * m + c] = {static_cast<std::uint32_t>(t.node[c]),
                                                                     t.weight[c] * cfg.marks.probs[m]};
            }

            if (ih == grid.nh() - 1) continue;  // Dirichlet row
            for (int r = 0; r < 2; ++r) {
                const Regime regime = regime_from_index(r);
                const double g = running_reward(cfg, regime, h);
                for (int choice = 0; choice < 2; ++choice) {
                    const double beta = beta_value(cfg, static_cast<BetaChoice>(choice), regime, h, ell);
                    const auto [mu_h, mu_ell] = drift_coefficients(cfg, regime, h, ell, beta);
                    const double q = std::abs(mu_h) * k + std::abs(mu_ell) * j + j * k * ell;
                    if (!(q > 0.0)) throw DomainError("BellmanOperator: degenerate normalisation Q = 0");
                    const double dt = j * k / q;
                    Coeffs& cf = coeffs(node, r, choice);
                    cf.p = {k * std::max(mu_h, 0.0) / q, j * std::max(mu_ell, 0.0) / q, k * std::max(-mu_h, 0.0) / q,
                            j * std::max(-mu_ell, 0.0) / q};
                    cf.p_jump = j * k * ell / q;
                    cf.g_dt = g * dt;
                    cf.denom = 1.0 + cfg.rho * dt;
                    cf.dt = dt;
                    min_dt_ = std::min(min_dt_, dt);
                }
            }
        }
    }
}

namespace {
// Generator values closer than this are ties. At h_min both candidates have
// the same generator and differ only by rounding.
constexpr double kRateTie = 1e-9;
} // namespace

double BellmanOperator::apply_rows(const ValueField& in, ValueField& out, PolicyField* policy, int row_begin,
                                   int row_end) const {
    const int nl = grid_.nl();
    const int top = grid_.nh() - 1;
    double change = 0.0;
    for (int ih = row_begin; ih < row_end; ++ih) {
        if (ih == top) {
            for (int il = 0; il < nl; ++il) {
                const std::size_t node = grid_.index(ih, il);
                for (int r = 0; r < 2; ++r) {
                    out.v[r][node] = 0.0 - cfg_.P;  // +0 rather than -0 when P = 0
                    change = std::max(change, std::abs(out.v[r][node] - in.v[r][node]));
                }
            }
            continue;
        }
        for (int il = 0; il < nl; ++il) {
            const std::size_t node = grid_.index(ih, il);
            const auto& nb = neighbours_[node];
            const JumpCorner* corners = jumps_.data() + node * corners_per_node_;
            for (int r = 0; r < 2; ++r) {
                const std::vector<double>& v = in.v[r];
                double jump = 0.0;
                for (std::size_t c = 0; c < corners_per_node_; ++c) jump += corners[c].weight * v[corners[c].node];

                double best = 0.0;
                double best_rate = 0.0;
                BetaChoice arg = BetaChoice::Floor;
                for (int choice = 0; choice < 2; ++choice) {
                    const Coeffs& cf = coeffs(node, r, choice);
                    const double cont = (cf.p[0] * v[nb[0]] + cf.p[1] * v[nb[1]] + cf.p[2] * v[nb[2]] +
                                         cf.p[3] * v[nb[3]] + cf.p_jump * jump + cf.g_dt) /
                                        cf.denom;
                    if (choice == 0 || cont > best) best = cont;
                    // The recorded control maximises the generator, (cont - v) / dt, which
                    // stays meaningful where the obstacle is active. Ties stay on the floor.
                    const double rate = (cont - v[node]) * cf.denom / cf.dt;
                    if (choice == 0 || rate > best_rate + kRateTie * (1.0 + std::abs(best_rate))) {
                        best_rate = rate;
                        arg = static_cast<BetaChoice>(choice);
                    }
                }
                const double obstacle = in.v[1 - r][node] - cfg_.kappa;
                const bool sw = obstacle > best;
                const double next = sw ? obstacle : best;
                out.v[r][node] = next;
                change = std::max(change, std::abs(next - v[node]));
                if (policy) {
                    policy->switch_regime[r][node] = sw ? 1 : 0;
                    policy->beta[r][node] = arg;
                }
            }
        }
    }
    return change;
}

namespace {

// The Dirichlet row never uses its stencil; give it the decisions of the row
// below so nearest-node lookups near the crest stay meaningful.
void fill_dirichlet_policy(const Grid& g, PolicyField& p) {
    const int top = g.nh() - 1;
    for (int r = 0; r < 2; ++r)
        for (int il = 0; il < g.nl(); ++il) {
            p.switch_regime[r][g.index(top, il)] = 0;
            p.beta[r][g.index(top, il)] = p.beta[r][g.index(top - 1, il)];
        }
}

} // namespace

std::pair<ValueField, PolicyField> bellman_update(const ModelConfig& cfg, const Grid& grid, const ValueField& v) {
    const BellmanOperator op(cfg, grid);
    ValueField out(grid.size(), 0.0);
    PolicyField policy(grid.size());
    op.apply(v, out, &policy);
    fill_dirichlet_policy(grid, policy);
    return {std::move(out), std::move(policy)};
}

SolveResult solve(const ModelConfig& cfg, const Grid& grid, const SolveOptions& opts) {
    if (!(opts.tol > 0.0)) throw std::invalid_argument("solve: tol must be > 0");
    if (opts.max_iter <= 0) throw std::invalid_argument("solve: max_iter must be > 0");
    const auto start = std::chrono::steady_clock::now();

    const BellmanOperator op(cfg, grid);
    const int rows = grid.nh();
    const int threads = std::clamp(opts.threads > 0 ? opts.threads : worker_count(), 1, rows);

    ValueField a(grid.size(), opts.initial.value_or(0.0));
    ValueField b(grid.size(), 0.0);
    ValueField* cur = &a;
    ValueField* nxt = &b;

    SolveResult res;
    std::vector<double> block_change(threads, 0.0);
    long sweeps = 0;
    bool converged = false;
    bool stop = false;

    auto on_sweep_done = [&]() noexcept {
        const double change = *std::max_element(block_change.begin(), block_change.end());
        ++sweeps;
        if (opts.keep_history) res.history.push_back(change);
        std::swap(cur, nxt);
        converged = change < opts.tol;
        stop = converged || sweeps >= opts.max_iter;
    };

    if (threads == 1) {
        while (!stop) {
            block_change[0] = op.apply_rows(*cur, *nxt, nullptr, 0, rows);
            on_sweep_done();
        }
    } else {
        std::barrier sync(threads, on_sweep_done);
        std::vector<std::jthread> pool;
        for (int w = 0; w < threads; ++w) {
            const int begin = rows * w / threads;
            const int end = rows * (w + 1) / threads;
            pool.emplace_back([&, w, begin, end] {
                while (true) {
                    block_change[w] = op.apply_rows(*cur, *nxt, nullptr, begin, end);
                    sync.arrive_and_wait();
                    if (stop) break;
                }
            });
        }
    }

    if (!converged) {
        std::vector<double> history = res.history;
        if (history.empty()) history.push_back(block_change[0]);
        const std::string what = "solve: no convergence after " + std::to_string(sweeps) + " sweeps (last change " +
                                 std::to_string(history.back()) + ")";
        throw NonConvergenceError(what, std::move(history));
    }

    // One more sweep for the residual and the optimal decisions at the returned field.
    res.policy = PolicyField(grid.size());
    res.residual = op.apply(*cur, *nxt, &res.policy);
    fill_dirichlet_policy(grid, res.policy);
    res.value = std::move(*cur);
    res.iterations = sweeps;
    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

ValueField hjb_residual(const ModelConfig& cfg, const Grid& grid, const ValueField& v) {
    const BellmanOperator op(cfg, grid);
    ValueField tv(grid.size(), 0.0);
    op.apply(v, tv);
    ValueField r(grid.size(), 0.0);
    for (int i = 0; i < 2; ++i)
        for (std::size_t n = 0; n < grid.size(); ++n) r.v[i][n] = v.v[i][n] - tv.v[i][n];
    const int top = grid.nh() - 1;
    for (int i = 0; i < 2; ++i)
        for (int il = 0; il < grid.nl(); ++il) r.v[i][grid.index(top, il)] = 0.0;
    return r;
}

std::vector<double> extract_threshold(const PolicyField& policy, const Grid& grid, Regime i) {
    std::vector<double> out(grid.nl(), std::numeric_limits<double>::infinity());
    const auto& beta = policy.beta[index_of(i)];
    for (int il = 0; il < grid.nl(); ++il)
        for (int ih = 0; ih < grid.nh() - 1; ++ih)
            if (beta[grid.index(ih, il)] == BetaChoice::Max) {
                out[il] = grid.h(ih);
                break;
            }
    return out;
}

} // namespace damctl
