#include "damctl/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace damctl {

Decision FloorPolicy::decide(const DamState& s) const {
    return {false, beta_floor(cfg_, s.regime, s.h, s.lambda)};
}

namespace {

/// Level velocity; zero once the reservoir is empty.
double level_rate(const ModelConfig& cfg, Regime i, double beta, double h) {
    if (h <= cfg.h_min) return 0.0;
    const double turbine = i == Regime::Operating ? phi(cfg, h) : 0.0;
    return -(turbine + beta * std::sqrt(2.0 * cfg.gravity * (h - cfg.h0)));
}

struct StepResult {
    double h;
    double production;  // discounted
    double penalties;   // discounted
    bool clamped;
};

/// Integrates (h, discounted production, discounted penalties) over [t, t + dt].
StepResult integrate(const ModelConfig& cfg, Regime i, double beta, double h, double t, double dt) {
    const int n = std::max(1, static_cast<int>(std::ceil(dt / cfg.simulation.dt_int - 1e-9)));
    const double step = dt / n;
    const double prod_rate = i == Regime::Operating ? cfg.energy : 0.0;
    StepResult r{h, 0.0, 0.0, false};

    auto pen = [&](double s, double hh) {
        hh = std::max(hh, cfg.h_min);
        return std::exp(-cfg.rho * s) * (penalty_high(cfg, hh) + penalty_low(cfg, hh));
    };
    auto prod = [&](double s) { return std::exp(-cfg.rho * s) * prod_rate; };

    double s = t;
    for (int m = 0; m < n; ++m) {
        const double h1 = r.h;
        const double k1 = level_rate(cfg, i, beta, h1);
        const double h2 = h1 + 0.5 * step * k1;
        const double k2 = level_rate(cfg, i, beta, h2);
        const double h3 = h1 + 0.5 * step * k2;
        const double k3 = level_rate(cfg, i, beta, h3);
        const double h4 = h1 + step * k3;
        const double k4 = level_rate(cfg, i, beta, h4);

        const double mid = s + 0.5 * step;
        r.penalties += step / 6.0 * (pen(s, h1) + 2.0 * pen(mid, h2) + 2.0 * pen(mid, h3) + pen(s + step, h4));
        r.production += step / 6.0 * (prod(s) + 4.0 * prod(mid) + prod(s + step));

        r.h = h1 + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (r.h < cfg.h_min) {
            r.h = cfg.h_min;
            r.clamped = true;
        }
        s = t + (m + 1) * step;
    }
    return r;
}

} // namespace

DamState drift_step(const ModelConfig& cfg, const DamState& state, double beta, double dt) {
    DamState out = state;
    if (state.failed || dt <= 0.0) return out;
    out.h = integrate(cfg, state.regime, beta, state.h, state.t, dt).h;
    out.lambda = intensity_between_jumps(HawkesParams::from(cfg), {state.lambda, state.t}, dt);
    out.t = state.t + dt;
    return out;
}

DamState apply_jump(const ModelConfig& cfg, const DamState& state, double mark) {
    DamState out = state;
    if (state.failed) return out;
    out.h = state.h + mark;
    out.lambda = state.lambda + cfg.c * mark;
    if (out.h >= cfg.h_max) {
        out.h = cfg.h_max;
        out.failed = true;
    }
    return out;
}

RewardAccumulator simulate_controlled(const ModelConfig& cfg, const Policy& policy, const DamState& x0,
                                      Rng& rng, double t_cut, std::vector<PathEvent>* log) {
    RewardAccumulator acc;
    DamState s = x0;
    if (s.h >= cfg.h_max) {
        s.h = cfg.h_max;
        s.failed = true;
    }
    if (s.failed) {
        acc.failed = true;
        acc.terminal_penalty = cfg.P * std::exp(-cfg.rho * s.t);
        acc.end_time = s.t;
        return acc;
    }

    const auto hp = HawkesParams::from(cfg);
    const double dt_dec = cfg.simulation.dt_dec;
    auto next_epoch_after = [&](double t) { return (std::floor(t / dt_dec + 1e-9) + 1.0) * dt_dec; };

    double next_jump = s.t + sample_next_jump_exact(hp, {s.lambda, s.t}, rng);
    bool decide_now = true;
    double next_decision = s.t;
    double beta = 0.0;

    while (s.t < t_cut) {
        if (decide_now) {
            const Decision d = policy.decide(s);
            if (d.switch_regime) {
                s.regime = other(s.regime);
                acc.switch_costs += cfg.kappa * std::exp(-cfg.rho * s.t);
                ++acc.switches;
                if (log) log->push_back({PathEventKind::Switch, s.t, s.h, s.lambda, s.regime});
            }
            const double floor = s.h > cfg.h0 ? beta_floor(cfg, s.regime, s.h, s.lambda) : 0.0;
            if (!(d.beta >= floor - 1e-12 && d.beta <= cfg.beta_max + 1e-12))
                throw std::invalid_argument("simulate_controlled: policy returned beta " + std::to_string(d.beta) +
                                            " outside [" + std::to_string(floor) + ", beta_max]");
            beta = std::clamp(d.beta, 0.0, cfg.beta_max);
            next_decision = next_epoch_after(s.t);
            decide_now = false;
        }

        const double t_end = std::min({next_decision, next_jump, t_cut});
        const double dt = t_end - s.t;
        if (dt > 0.0) {
            // nothing can be released from an empty reservoir
            const double applied = s.h <= cfg.h_min ? 0.0 : beta;
            const StepResult r = integrate(cfg, s.regime, applied, s.h, s.t, dt);
            acc.production += r.production;
            acc.penalties += r.penalties;
            acc.empty_hit = acc.empty_hit || r.clamped || s.h <= cfg.h_min;
            s.h = r.h;
            s.lambda = intensity_between_jumps(hp, {s.lambda, s.t}, dt);
            s.t = t_end;
        }
        if (t_end >= t_cut) break;

        if (t_end == next_jump) {
            if (acc.jumps >= cfg.simulation.max_events) {
                acc.truncated = true;
                break;
            }
            const double z = cfg.marks.values[sample_mark_index(cfg.marks, rng)];
            s = apply_jump(cfg, s, z);
            ++acc.jumps;
            if (s.failed) {
                acc.failed = true;
                acc.terminal_penalty = cfg.P * std::exp(-cfg.rho * s.t);
                if (log) log->push_back({PathEventKind::Failure, s.t, s.h, s.lambda, s.regime});
                break;
            }
            if (log) log->push_back({PathEventKind::Jump, s.t, s.h, s.lambda, s.regime});
            next_jump = s.t + sample_next_jump_exact(hp, {s.lambda, s.t}, rng);
            decide_now = true;
        } else {
            decide_now = true;  // epoch reached
        }
    }
    acc.end_time = s.t;
    return acc;
}

} // namespace damctl
