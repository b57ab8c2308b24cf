#include "damctl/hawkes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace damctl {

double intensity_between_jumps(const HawkesParams& p, const IntensityState& s, double dt) {
    return p.b + (s.lambda - p.b) * std::exp(-p.a * dt);
}

double compensator(const HawkesParams& p, const IntensityState& s, double dt) {
    // -expm1 keeps (1 - e^{-a dt}) accurate for small dt
    return p.b * dt + (s.lambda - p.b) * (-std::expm1(-p.a * dt)) / p.a;
}

double sample_next_jump_exact(const HawkesParams& p, const IntensityState& s, Rng& rng) {
    const double target = -std::log(rng.uniform_open());
    const double tol = 1e-10 * std::max(1.0, target);

    // Lambda(t) >= min(lambda, b) * t bounds the root from above.
    double lo = 0.0;
    double hi = target / std::min(s.lambda, p.b);
    double t = target / std::max(s.lambda, p.b);  // root of the tangent at 0 when lambda >= b
    for (int it = 0; it < 200; ++it) {
        const double f = compensator(p, s, t) - target;
        if (std::abs(f) <= tol) return t;
        if (f < 0.0)
            lo = t;
        else
            hi = t;
        const double newton = t - f / intensity_between_jumps(p, s, t);
        t = (newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
    }
    return t;
}

double sample_next_jump_thinning(const HawkesParams& p, const IntensityState& s, Rng& rng) {
    const double envelope = std::max(s.lambda, p.b);
    double t = 0.0;
    for (;;) {
        t += rng.exponential(envelope);
        const double u = rng.uniform_open();
        if (u * envelope <= intensity_between_jumps(p, s, t)) return t;
    }
}

std::size_t sample_mark_index(const MarkDistribution& marks, Rng& rng) {
    const double u = rng.uniform_open();
    double cum = 0.0;
    for (std::size_t m = 0; m + 1 < marks.size(); ++m) {
        cum += marks.probs[m];
        if (u <= cum) return m;
    }
    return marks.size() - 1;
}

EventStream simulate_stream(const ModelConfig& cfg, double lambda0, double horizon, Rng& rng,
                            long max_events, JumpSampler sampler) {
    if (lambda0 < cfg.b) throw std::invalid_argument("simulate_stream: lambda0 must be >= b");
    if (horizon < 0.0) throw std::invalid_argument("simulate_stream: horizon must be >= 0");

    const auto p = HawkesParams::from(cfg);
    EventStream out;
    out.horizon = horizon;
    IntensityState s{lambda0, 0.0};
    for (;;) {
        const double wait = sampler == JumpSampler::Exact ? sample_next_jump_exact(p, s, rng)
                                                          : sample_next_jump_thinning(p, s, rng);
        if (s.t + wait > horizon) break;
        if (static_cast<long>(out.events.size()) >= max_events) {
            out.truncated = true;
            break;
        }
        const double z = cfg.marks.values[sample_mark_index(cfg.marks, rng)];
        s.lambda = intensity_between_jumps(p, s, wait) + p.c * z;
        s.t += wait;
        out.events.push_back({s.t, z, s.lambda});
    }
    return out;
}

} // namespace damctl
