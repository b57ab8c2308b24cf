#pragma once

#include "damctl/model.hpp"
#include "damctl/rng.hpp"

#include <vector>

namespace damctl {

/// Exponential-kernel Hawkes coefficients: d lambda = a (b - lambda) dt + c dZ.
struct HawkesParams {
    double a;
    double b;
    double c;

    static HawkesParams from(const ModelConfig& cfg) noexcept { return {cfg.a, cfg.b, cfg.c}; }
};

struct IntensityState {
    double lambda;
    double t = 0.0;
};

struct MarkedEvent {
    double time;
    double mark;
    double intensity_after;  ///< intensity right after the jump
};

struct EventStream {
    std::vector<MarkedEvent> events;
    double horizon = 0.0;
    bool truncated = false;  ///< stopped by max_events before reaching the horizon
};

enum class JumpSampler { Exact, Thinning };

/// Intensity after `dt` time units without jumps: b + (lambda - b) e^{-a dt}.
double intensity_between_jumps(const HawkesParams& p, const IntensityState& s, double dt);

/// Integrated intensity over [0, dt] without jumps.
double compensator(const HawkesParams& p, const IntensityState& s, double dt);

/// Waiting time to the next jump, by inverting the compensator at an
/// exponential draw. Safeguarded Newton on a bracket; tolerance 1e-10 on the
/// compensator value.
double sample_next_jump_exact(const HawkesParams& p, const IntensityState& s, Rng& rng);

/// Same law as sample_next_jump_exact, by Ogata thinning with the current
/// intensity as envelope.
double sample_next_jump_thinning(const HawkesParams& p, const IntensityState& s, Rng& rng);

/// Inverse-CDF draw from the mark law; ties go to the smaller index.
std::size_t sample_mark_index(const MarkDistribution& marks, Rng& rng);

/// Simulates marked jumps on [0, horizon] starting from intensity lambda0.
/// Throws std::invalid_argument if lambda0 < b or horizon < 0.
EventStream simulate_stream(const ModelConfig& cfg, double lambda0, double horizon, Rng& rng,
                            long max_events, JumpSampler sampler = JumpSampler::Exact);

} // namespace damctl
