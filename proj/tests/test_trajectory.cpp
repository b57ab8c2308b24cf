#include "damctl/analysis.hpp"
#include "damctl/trajectory.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <stdexcept>

using namespace damctl;

namespace {

// Exact level under regime 0 and constant beta: sqrt(h - h0) falls linearly.
double closed_form_level(const ModelConfig& cfg, double h, double beta, double t) {
    const double r = std::sqrt(h - cfg.h0) - 0.5 * beta * std::sqrt(2.0 * cfg.gravity) * t;
    return r * r + cfg.h0;
}

class ScriptedPolicy final : public Policy {
public:
    explicit ScriptedPolicy(std::function<Decision(const DamState&)> f) : f_(std::move(f)) {}
    Decision decide(const DamState& s) const override { return f_(s); }

private:
    std::function<Decision(const DamState&)> f_;
};

} // namespace

TEST_CASE("drift without outflow leaves the level unchanged") {
    const ModelConfig cfg;
    const DamState s{70.0, 2.0, Regime::Closed};
    const DamState out = drift_step(cfg, s, 0.0, 1.0);
    CHECK(out.h == 70.0);
    CHECK(out.lambda == doctest::Approx(0.01 + 1.99 * std::exp(-0.3)).epsilon(1e-14));
    CHECK(out.t == 1.0);
}

TEST_CASE("drift with full spill") {
    const ModelConfig cfg;
    const DamState s{50.0, 1.0, Regime::Closed};
    const double h = drift_step(cfg, s, 1.2, 0.01).h;
    CHECK(50.0 - h == doctest::Approx(0.3795).epsilon(2e-3));
    CHECK(h == doctest::Approx(closed_form_level(cfg, 50.0, 1.2, 0.01)).epsilon(1e-13));
    // one forward-Euler step differs by the second-order term 0.5 dt^2 f f' (about 7e-4)
    const double euler = 50.0 - spill_rate(cfg, 1.2, 50.0) * 0.01;
    CHECK(std::abs(h - euler) < 1e-3);
    // long horizon against the closed form
    CHECK(drift_step(cfg, s, 1.2, 1.0).h == doctest::Approx(closed_form_level(cfg, 50.0, 1.2, 1.0)).epsilon(1e-9));
}

TEST_CASE("RK4 substeps converge at fourth order") {
    ModelConfig cfg;
    double hs[3];
    const double steps[3] = {0.1, 0.05, 0.025};
    for (int q = 0; q < 3; ++q) {
        cfg.simulation.dt_int = steps[q];
        hs[q] = drift_step(cfg, {50.0, 1.0, Regime::Operating}, 1.2, 1.0).h;
    }
    const double ratio = (hs[0] - hs[1]) / (hs[1] - hs[2]);
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);
}

TEST_CASE("energy balance of the turbine-only drift") {
    const ModelConfig cfg;
    const DamState s{60.0, 1.0, Regime::Operating};
    const double T = 5.0;
    const double h = drift_step(cfg, s, 0.0, T).h;
    const double slope = ((h - cfg.h0) * (h - cfg.h0) - (60.0 - cfg.h0) * (60.0 - cfg.h0)) / T;
    CHECK(std::abs(slope + 2.0 * cfg.energy / (cfg.surface * cfg.gravity * cfg.efficiency)) <= 1e-6);
}

TEST_CASE("drift clamps at the bottom and never raises the level") {
    const ModelConfig cfg;
    const DamState s{0.5, 1.0, Regime::Operating};
    const DamState out = drift_step(cfg, s, 1.2, 2.0);
    CHECK(out.h == cfg.h_min);
    for (double h : {0.0, 3.0, 40.0, 99.0})
        for (double beta : {0.0, 0.4, 1.2})
            for (Regime i : {Regime::Closed, Regime::Operating})
                CHECK(drift_step(cfg, {h, 0.5, i}, beta, 0.3).h <= h);
}

TEST_CASE("jumps") {
    const ModelConfig cfg;
    const DamState a = apply_jump(cfg, {50.0, 0.5, Regime::Closed}, 10.0);
    CHECK(a.h == 60.0);
    CHECK(a.lambda == doctest::Approx(1.5));
    CHECK_FALSE(a.failed);

    const DamState b = apply_jump(cfg, {95.0, 0.5, Regime::Closed}, 10.0);
    CHECK(b.failed);
    CHECK(b.h == cfg.h_max);

    const DamState c = apply_jump(cfg, b, 10.0);
    CHECK(c.failed);
    CHECK(c.h == cfg.h_max);
    CHECK(c.lambda == b.lambda);
}

TEST_CASE("no production, no penalty in the band") {
    ModelConfig cfg;
    cfg.c = 0.0;
    cfg.b = 1e-6;
    cfg.mu = 0.0;
    Rng rng(1);
    const auto acc = simulate_controlled(cfg, ConstantPolicy(0.0), {70.0, cfg.b, Regime::Closed}, rng, 100.0);
    CHECK(std::abs(acc.total()) < 1e-3);
}

TEST_CASE("deterministic production path against quadrature") {
    ModelConfig cfg;
    cfg.c = 0.0;
    cfg.b = 1e-6;
    cfg.mu = 0.0;
    const double h_start = 50.2;
    Rng rng(2);
    const auto acc = simulate_controlled(cfg, ConstantPolicy(0.0), {h_start, cfg.b, Regime::Operating}, rng, 100.0);
    REQUIRE(acc.jumps == 0);

    // (h - h0)^2 falls linearly at rate 2E/(S g (1 - chi)); Simpson on the closed-form path
    const double rate = 2.0 * cfg.energy / (cfg.surface * cfg.gravity * cfg.efficiency);
    auto level = [&](double t) { return std::sqrt((h_start - cfg.h0) * (h_start - cfg.h0) - rate * t) + cfg.h0; };
    auto integrand = [&](double t) { return std::exp(-cfg.rho * t) * running_reward(cfg, Regime::Operating, level(t)); };
    const int n = 200000;
    const double T = 100.0, hstep = T / n;
    double simpson = integrand(0) + integrand(T);
    for (int m = 1; m < n; ++m) simpson += (m % 2 ? 4.0 : 2.0) * integrand(m * hstep);
    simpson *= hstep / 3.0;

    const double exit_time = ((h_start - cfg.h0) * (h_start - cfg.h0) - (cfg.h_minus - cfg.h0) * (cfg.h_minus - cfg.h0)) / rate;
    CHECK(exit_time == doctest::Approx(31.7355).epsilon(1e-5));
    CHECK(std::abs(acc.total() - simpson) < 1e-3);
    CHECK(acc.penalties > 0.0);  // the level leaves the band before t_cut
}

TEST_CASE("failed initial state pays the failure penalty only") {
    ModelConfig cfg;
    Rng rng(3);
    auto acc = simulate_controlled(cfg, FloorPolicy(cfg), {cfg.h_max, 1.0, Regime::Operating}, rng, 100.0);
    CHECK(acc.failed);
    CHECK(acc.total() == -cfg.P);
    CHECK(acc.total() == 0.0);

    cfg.P = 5.0;
    Rng rng2(3);
    acc = simulate_controlled(cfg, FloorPolicy(cfg), {cfg.h_max, 1.0, Regime::Operating}, rng2, 100.0);
    CHECK(acc.total() == -5.0);
    const McEstimate est = mc_value(cfg, FloorPolicy(cfg), {cfg.h_max, 1.0, Regime::Operating}, 100, 9, 1);
    CHECK(est.estimate == -5.0);
    CHECK(est.std_error == 0.0);
}

TEST_CASE("switch cost accounting") {
    ModelConfig cfg;
    cfg.c = 0.001;
    const auto base = [&](const DamState& s) { return Decision{false, beta_floor(cfg, s.regime, s.h, s.lambda)}; };
    // Same decisions, plus a round trip of switches at the first epochs after t = 1 and t = 2.
    const auto extra = [&](const DamState& s) {
        const bool sw = (s.t >= 1.0 && s.t < 1.05 && s.regime == Regime::Operating) ||
                        (s.t >= 2.0 && s.t < 2.05 && s.regime == Regime::Closed);
        const Regime next = sw ? other(s.regime) : s.regime;
        return Decision{sw, beta_floor(cfg, next, s.h, s.lambda)};
    };
    std::vector<PathEvent> log_a, log_b;
    Rng ra(5), rb(5);
    const auto a = simulate_controlled(cfg, ScriptedPolicy(base), {60.0, 0.5, Regime::Operating}, ra, 100.0, &log_a);
    const auto b = simulate_controlled(cfg, ScriptedPolicy(extra), {60.0, 0.5, Regime::Operating}, rb, 100.0, &log_b);
    double expected = 0.0;
    int switches = 0;
    for (const auto& e : log_b)
        if (e.kind == PathEventKind::Switch) {
            expected += cfg.kappa * std::exp(-cfg.rho * e.t);
            ++switches;
        }
    CHECK(switches == 2);
    CHECK(a.switches == 0);
    CHECK(b.switches == 2);
    CHECK(b.switch_costs - a.switch_costs == doctest::Approx(expected).epsilon(1e-14));
    CHECK(b.total() == doctest::Approx(b.production - b.penalties - b.switch_costs - b.terminal_penalty));
}

TEST_CASE("level only rises at jumps") {
    ModelConfig cfg;
    cfg.c = 0.01;
    std::vector<std::pair<double, double>> seen;  // (t, h) at decision epochs
    ScriptedPolicy p([&](const DamState& s) {
        seen.emplace_back(s.t, s.h);
        return Decision{false, beta_floor(cfg, s.regime, s.h, s.lambda)};
    });
    std::vector<PathEvent> log;
    Rng rng(8);
    simulate_controlled(cfg, p, {40.0, 0.8, Regime::Operating}, rng, 100.0, &log);
    std::vector<double> jumps;
    for (const auto& e : log)
        if (e.kind != PathEventKind::Switch) jumps.push_back(e.t);
    REQUIRE(!jumps.empty());
    for (std::size_t q = 1; q < seen.size(); ++q) {
        bool jumped = false;
        for (double t : jumps) jumped = jumped || (t > seen[q - 1].first && t <= seen[q].first);
        if (!jumped) CHECK(seen[q].second <= seen[q - 1].second);
        CHECK(seen[q].second >= cfg.h_min);
        CHECK(seen[q].second <= cfg.h_max);
    }
}

TEST_CASE("floor mode contract at decision epochs") {
    for (auto mode : {BetaFloorMode::Paper, BetaFloorMode::Outflow}) {
        ModelConfig cfg;
        cfg.c = 0.001;
        cfg.beta_floor_mode = mode;
        const FloorPolicy floor(cfg);
        for (double h : {5.0, 30.0, 60.0})
            for (Regime i : {Regime::Closed, Regime::Operating}) {
                const DamState s{h, 0.5, i};
                const double beta = floor.decide(s).beta;
                const double turbine = i == Regime::Operating ? phi(cfg, h) : 0.0;
                if (mode == BetaFloorMode::Paper)
                    CHECK(beta >= std::max(cfg.mu - turbine, 0.0) - 1e-15);
                else
                    CHECK(turbine + spill_rate(cfg, beta, h) >= cfg.mu - 1e-12);
            }
    }
}

TEST_CASE("infeasible control is rejected") {
    const ModelConfig cfg;
    Rng rng(4);
    CHECK_THROWS_AS(simulate_controlled(cfg, ConstantPolicy(0.0), {60.0, 0.5, Regime::Closed}, rng, 10.0),
                    std::invalid_argument);
    Rng rng2(4);
    CHECK_THROWS_AS(simulate_controlled(cfg, ConstantPolicy(1.5), {60.0, 2.0, Regime::Closed}, rng2, 10.0),
                    std::invalid_argument);
}

TEST_CASE("empty reservoir is flagged") {
    ModelConfig cfg;
    cfg.c = 0.0;
    cfg.b = 1e-6;
    Rng rng(6);
    const auto acc = simulate_controlled(cfg, ConstantPolicy(1.2), {5.0, cfg.b, Regime::Closed}, rng, 20.0);
    CHECK(acc.empty_hit);
    CHECK_FALSE(acc.failed);
}

TEST_CASE("paths are reproducible") {
    ModelConfig cfg;
    cfg.c = 0.001;
    const FloorPolicy p(cfg);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        Rng a(seed), b(seed);
        const auto x = simulate_controlled(cfg, p, {55.0, 1.2, Regime::Operating}, a, 100.0);
        const auto y = simulate_controlled(cfg, p, {55.0, 1.2, Regime::Operating}, b, 100.0);
        CHECK(x.total() == y.total());
        CHECK(x.jumps == y.jumps);
    }
}
