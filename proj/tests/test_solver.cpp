#include "damctl/error.hpp"
#include "damctl/solver.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

using namespace damctl;

namespace {

ModelConfig toy(int nh = 3, int nl = 3) {
    ModelConfig cfg;
    cfg.grid.nh = nh;
    cfg.grid.nl = nl;
    return cfg;
}

SolveOptions tight(double tol = 1e-13) {
    SolveOptions o;
    o.tol = tol;
    o.max_iter = 10'000'000;
    o.threads = 1;
    return o;
}

double sup_diff(const ValueField& a, const ValueField& b) {
    double m = 0.0;
    for (int r = 0; r < 2; ++r)
        for (std::size_t n = 0; n < a.v[r].size(); ++n) m = std::max(m, std::abs(a.v[r][n] - b.v[r][n]));
    return m;
}

double stencil_sum(const TransitionStencil& s) { return std::accumulate(s.probs.begin(), s.probs.end(), 0.0); }

} // namespace

TEST_CASE("grid geometry") {
    const Grid g(ModelConfig{});
    CHECK(g.nh() == 100);
    CHECK(g.j() == doctest::Approx(100.0 / 99));
    CHECK(g.k() == doctest::Approx(2.99 / 99));
    CHECK(g.h(g.nh() - 1) == 100.0);
    CHECK(g.ell(g.nl() - 1) == 3.0);
    CHECK(g.h(0) == 0.0);
    CHECK(g.nearest_h(-5.0) == 0);
    CHECK(g.nearest_h(1e9) == g.nh() - 1);
    CHECK(g.nearest_ell(0.5) == 16);
    const Grid f = g.refined();
    CHECK(f.nh() == 199);
    CHECK(f.j() == doctest::Approx(g.j() / 2));
    CHECK(f.h(2 * 37) == doctest::Approx(g.h(37)).epsilon(1e-14));
    CHECK_THROWS_AS(Grid(1, 5, 0, 1, 0.1, 1), std::invalid_argument);
}

TEST_CASE("drift coefficients") {
    const ModelConfig cfg;
    const auto d = drift_coefficients(cfg, Regime::Closed, 50.0, 0.5, 1.2);
    CHECK(d.mu_h == doctest::Approx(-37.952).epsilon(1e-4));
    CHECK(d.mu_ell == doctest::Approx(-0.147));
    CHECK(drift_coefficients(cfg, Regime::Closed, 30.0, 0.5, 0.0).mu_h == 0.0);
    CHECK(drift_coefficients(cfg, Regime::Operating, 30.0, cfg.b, 0.3).mu_ell == 0.0);
    CHECK(drift_coefficients(cfg, Regime::Operating, 30.0, 2.0, 0.0).mu_h < 0.0);
    CHECK(drift_coefficients(cfg, Regime::Operating, 30.0, 0.001, 0.0).mu_ell > 0.0);
}

TEST_CASE("stencil worked example") {
    // j = 1, k = 0.03 with ell = 0.5 on a node
    ModelConfig cfg;
    cfg.grid = {101, 100, 0.02, 0.02 + 0.03 * 99};
    const Grid g(cfg);
    REQUIRE(g.j() == doctest::Approx(1.0));
    REQUIRE(g.k() == doctest::Approx(0.03));
    REQUIRE(g.ell(16) == doctest::Approx(0.5));
    const auto s = build_stencil(cfg, g, Regime::Closed, 50, 16, 1.2);

    // independent recomputation
    const double muh = -1.2 * std::sqrt(2 * 9.806 * 51.0);
    const double mul = 0.3 * (0.01 - 0.5);
    const double q = -muh * 0.03 + -mul * 1.0 + 1.0 * 0.03 * 0.5;
    CHECK(s.q == doctest::Approx(q).epsilon(1e-12));
    CHECK(s.q == doctest::Approx(1.3005).epsilon(1e-4));
    CHECK(s.dt == doctest::Approx(0.03 / q).epsilon(1e-12));
    REQUIRE(s.probs.size() == 7);
    CHECK(s.probs[0] == 0.0);
    CHECK(s.probs[1] == 0.0);
    CHECK(s.probs[2] == doctest::Approx(0.8754).epsilon(1e-4));
    CHECK(s.probs[3] == doctest::Approx(0.11303).epsilon(1e-4));
    CHECK(s.probs[4] == doctest::Approx(0.002884).epsilon(1e-3));
    CHECK(s.probs[5] == doctest::Approx(0.015 / q / 3.0).epsilon(1e-12));
    CHECK(s.probs[6] == doctest::Approx(0.015 * 5.0 / 12.0 / q).epsilon(1e-12));
    CHECK(std::abs(stencil_sum(s) - 1.0) <= 1e-12);

    // y3 is one level down, y4 one intensity step down
    CHECK(s.targets[2].node[0] == g.index(49, 16));
    CHECK(s.targets[3].node[0] == g.index(50, 15));
    // first jump target (60, 1.5) is reproduced by its bilinear weights
    double w = 0.0, hx = 0.0, lx = 0.0;
    for (int c = 0; c < s.targets[4].count; ++c) {
        const auto n = s.targets[4].node[c];
        w += s.targets[4].weight[c];
        hx += s.targets[4].weight[c] * g.h(static_cast<int>(n / g.nl()));
        lx += s.targets[4].weight[c] * g.ell(static_cast<int>(n % g.nl()));
    }
    CHECK(w == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(hx == doctest::Approx(60.0).epsilon(1e-12));
    CHECK(lx == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("pure-jump stencil at the mean-reversion level") {
    ModelConfig cfg;
    const Grid g(cfg);
    REQUIRE(g.ell(0) == cfg.b);
    const auto s = build_stencil(cfg, g, Regime::Closed, 40, 0, 0.0);
    CHECK(s.probs[0] + s.probs[1] + s.probs[2] + s.probs[3] == 0.0);
    CHECK(s.probs[4] + s.probs[5] + s.probs[6] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s.dt == doctest::Approx(1.0 / cfg.b).epsilon(1e-12));
}

TEST_CASE("stencil simplex on random draws") {
    const ModelConfig cfg;
    const Grid g(cfg);
    std::mt19937_64 gen(42);
    std::uniform_int_distribution<int> ih(0, g.nh() - 2), il(0, g.nl() - 1), reg(0, 1);
    std::uniform_real_distribution<double> beta(0.0, cfg.beta_max);
    for (int draw = 0; draw < 1000; ++draw) {
        const auto s = build_stencil(cfg, g, regime_from_index(reg(gen)), ih(gen), il(gen), beta(gen));
        for (double p : s.probs) CHECK(p >= 0.0);
        CHECK(std::abs(stencil_sum(s) - 1.0) <= 1e-12);
        CHECK(s.dt > 0.0);
        CHECK(s.dt == doctest::Approx(g.j() * g.k() / s.q).epsilon(1e-14));
        for (std::size_t m = 4; m < s.targets.size(); ++m) {
            double w = 0.0;
            for (int c = 0; c < s.targets[m].count; ++c) {
                CHECK(s.targets[m].weight[c] >= 0.0);
                w += s.targets[m].weight[c];
            }
            CHECK(w == doctest::Approx(1.0).epsilon(1e-14));
        }
    }
}

TEST_CASE("interpolation targets are clamped into the grid") {
    const Grid g(ModelConfig{});
    const auto t = interpolation_target(g, 250.0, 9.0);
    double w = 0.0;
    for (int c = 0; c < t.count; ++c) {
        w += t.weight[c];
        if (t.weight[c] > 0) CHECK(t.node[c] == g.index(g.nh() - 1, g.nl() - 1));
    }
    CHECK(w == doctest::Approx(1.0));
}

TEST_CASE("constant-field contraction") {
    ModelConfig cfg = toy(4, 4);
    const double V = 7.0;
    cfg.energy = 0.0;
    cfg.penalty_coeff = 0.0;
    cfg.P = -V;
    cfg.kappa = 1e6;
    const Grid g(cfg);
    ValueField v(g.size(), V);
    const auto [out, policy] = bellman_update(cfg, g, v);
    for (int r = 0; r < 2; ++r)
        for (int ih = 0; ih < g.nh() - 1; ++ih)
            for (int il = 0; il < g.nl(); ++il) {
                const Regime i = regime_from_index(r);
                double expected = -INFINITY;
                for (auto c : {BetaChoice::Floor, BetaChoice::Max}) {
                    const auto s = build_stencil(cfg, g, i, ih, il, beta_value(cfg, c, i, g.h(ih), g.ell(il)));
                    expected = std::max(expected, V / (1.0 + cfg.rho * s.dt));
                }
                CHECK(out.v[r][g.index(ih, il)] == doctest::Approx(expected).epsilon(1e-14));
                CHECK(policy.switch_regime[r][g.index(ih, il)] == 0);
            }
}

TEST_CASE("obstacle activation") {
    const ModelConfig cfg = toy(4, 4);
    const Grid g(cfg);
    ValueField v(g.size(), 0.0);
    const std::size_t node = g.index(1, 2);
    v.v[1][node] = 50.0;
    const auto [out, policy] = bellman_update(cfg, g, v);
    CHECK(out.v[0][node] == 50.0 - cfg.kappa);
    CHECK(policy.switch_regime[0][node] == 1);
}

TEST_CASE("Dirichlet row") {
    ModelConfig cfg = toy(5, 4);
    cfg.P = 2.5;
    const Grid g(cfg);
    ValueField v(g.size(), 1.0);
    const auto [out, policy] = bellman_update(cfg, g, v);
    for (int il = 0; il < g.nl(); ++il)
        for (int r = 0; r < 2; ++r) CHECK(out.v[r][g.index(g.nh() - 1, il)] == -2.5);
    const auto res = hjb_residual(cfg, g, out);
    for (int il = 0; il < g.nl(); ++il)
        for (int r = 0; r < 2; ++r) CHECK(res.v[r][g.index(g.nh() - 1, il)] == 0.0);
}

TEST_CASE("toy grid fixed point matches brute-force iteration") {
    const ModelConfig cfg = toy();
    const Grid g(cfg);
    const auto res = solve(cfg, g, tight());
    const auto ref = oracle::brute_force_value_iteration(cfg);
    double err = 0.0;
    for (int r = 0; r < 2; ++r)
        for (int ih = 0; ih < 3; ++ih)
            for (int il = 0; il < 3; ++il) err = std::max(err, std::abs(res.value.v[r][g.index(ih, il)] - ref.v[r][il][ih]));
    CHECK(err <= 1e-10);
}

TEST_CASE("brute-force agreement with outflow floor and failure penalty") {
    ModelConfig cfg = toy(4, 3);
    cfg.beta_floor_mode = BetaFloorMode::Outflow;
    cfg.P = 4.0;
    cfg.c = 0.3;
    const Grid g(cfg);
    const auto res = solve(cfg, g, tight());
    const auto ref = oracle::brute_force_value_iteration(cfg);
    for (int r = 0; r < 2; ++r)
        for (int ih = 0; ih < g.nh(); ++ih)
            for (int il = 0; il < g.nl(); ++il)
                CHECK(std::abs(res.value.v[r][g.index(ih, il)] - ref.v[r][il][ih]) <= 1e-10);
}

TEST_CASE("Bellman operator is monotone") {
    const ModelConfig cfg = toy(12, 10);
    const Grid g(cfg);
    const BellmanOperator op(cfg, g);
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> val(-20.0, 20.0), gap(0.0, 5.0);
    for (int pair = 0; pair < 100; ++pair) {
        ValueField u(g.size(), 0.0), w(g.size(), 0.0), tu(g.size(), 0.0), tw(g.size(), 0.0);
        for (int r = 0; r < 2; ++r)
            for (std::size_t n = 0; n < g.size(); ++n) {
                u.v[r][n] = val(gen);
                w.v[r][n] = u.v[r][n] + (pair % 3 == 0 && n % 5 == 0 ? 0.0 : gap(gen));
            }
        op.apply(u, tu);
        op.apply(w, tw);
        for (int r = 0; r < 2; ++r)
            for (std::size_t n = 0; n < g.size(); ++n) REQUIRE(tu.v[r][n] <= tw.v[r][n]);
    }
}

TEST_CASE("discount scaling") {
    ModelConfig cfg = toy(8, 6);
    const Grid g(cfg);
    const auto base = solve(cfg, g, tight(1e-12));
    const double s = 2.0;
    // scaling the surface with the energy keeps the turbine flow unchanged
    cfg.energy *= s;
    cfg.surface *= s;
    cfg.penalty_coeff *= s;
    cfg.P *= s;
    cfg.kappa *= s;
    const auto scaled = solve(cfg, g, tight(1e-12));
    for (int r = 0; r < 2; ++r)
        for (std::size_t n = 0; n < g.size(); ++n)
            CHECK(scaled.value.v[r][n] == doctest::Approx(s * base.value.v[r][n]).epsilon(1e-10));
}

TEST_CASE("contraction on the continuation branch") {
    ModelConfig cfg = toy(6, 5);
    cfg.kappa = 1e4;  // switching never pays
    cfg.grid.ell_min = 1.0;
    const Grid g(cfg);
    const BellmanOperator op(cfg, g);
    const double factor = 1.0 / (1.0 + cfg.rho * op.min_dt());
    const auto res = solve(cfg, g, tight(1e-12));
    REQUIRE(res.history.size() > 10);
    for (std::size_t n = 1; n < res.history.size(); ++n)
        CHECK(res.history[n] <= factor * res.history[n - 1] * (1 + 1e-12) + 1e-15);
}

TEST_CASE("fixed-point properties of a moderate solve") {
    ModelConfig cfg = toy(30, 25);
    const Grid g(cfg);
    SolveOptions o = tight(1e-10);
    const auto res = solve(cfg, g, o);
    CHECK(res.residual <= 10 * o.tol);
    const auto resid = hjb_residual(cfg, g, res.value);
    for (int r = 0; r < 2; ++r)
        for (std::size_t n = 0; n < g.size(); ++n) {
            CHECK(std::abs(resid.v[r][n]) <= 10 * o.tol);
            CHECK(res.value.v[r][n] - res.value.v[1 - r][n] + cfg.kappa >= -1e-9);
            CHECK_FALSE((res.policy.switch_regime[0][n] && res.policy.switch_regime[1][n]));
        }
}

TEST_CASE("restart from a negative field reaches the same fixed point") {
    const ModelConfig cfg = toy(30, 25);
    const Grid g(cfg);
    SolveOptions a = tight(1e-11);
    SolveOptions b = a;
    b.initial = -1e3;
    const auto x = solve(cfg, g, a);
    const auto y = solve(cfg, g, b);
    CHECK(sup_diff(x.value, y.value) <= 1e-6);
    const BellmanOperator op(cfg, g);
    long differing = 0;
    for (int r = 0; r < 2; ++r)
        for (std::size_t n = 0; n < g.size(); ++n)
            differing += x.policy.switch_regime[r][n] != y.policy.switch_regime[r][n] ||
                         x.policy.beta[r][n] != y.policy.beta[r][n];
    CHECK(differing == 0);
}

TEST_CASE("thread count does not change the fixed point") {
    const ModelConfig cfg = toy(40, 30);
    const Grid g(cfg);
    SolveOptions one = tight(1e-10);
    SolveOptions many = one;
    many.threads = 4;
    const auto x = solve(cfg, g, one);
    const auto y = solve(cfg, g, many);
    CHECK(x.iterations == y.iterations);
    CHECK(sup_diff(x.value, y.value) == 0.0);
    for (int r = 0; r < 2; ++r) {
        CHECK(x.policy.beta[r] == y.policy.beta[r]);
        CHECK(x.policy.switch_regime[r] == y.policy.switch_regime[r]);
    }
}

TEST_CASE("residual sign at the zero field") {
    const ModelConfig cfg = toy(10, 10);
    const Grid g(cfg);
    const ValueField zero(g.size(), 0.0);
    const auto res = hjb_residual(cfg, g, zero);
    // regime 1 in the comfort band: G = E > 0, so the update improves on 0
    const int ih = g.nearest_h(66.0);
    REQUIRE(running_reward(cfg, Regime::Operating, g.h(ih)) > 0.0);
    CHECK(res.v[1][g.index(ih, 4)] < 0.0);
}

TEST_CASE("non-convergence carries the history") {
    const ModelConfig cfg = toy(10, 10);
    SolveOptions o = tight(1e-14);
    o.max_iter = 5;
    try {
        solve(cfg, Grid(cfg), o);
        FAIL("expected NonConvergenceError");
    } catch (const NonConvergenceError& e) {
        CHECK(e.residual_history().size() == 5);
        CHECK(e.last_residual() > 1e-14);
    }
}

TEST_CASE("threshold extraction degenerate cases") {
    const Grid g(toy(5, 4));
    PolicyField p(g.size());
    for (double h : extract_threshold(p, g, Regime::Closed)) CHECK(std::isinf(h));
    for (auto& b : p.beta[1]) b = BetaChoice::Max;
    for (double h : extract_threshold(p, g, Regime::Operating)) CHECK(h == g.h_min());
    p.beta[0][g.index(2, 1)] = BetaChoice::Max;
    p.beta[0][g.index(3, 1)] = BetaChoice::Max;
    const auto t = extract_threshold(p, g, Regime::Closed);
    CHECK(t[1] == g.h(2));
    CHECK(std::isinf(t[0]));
}
