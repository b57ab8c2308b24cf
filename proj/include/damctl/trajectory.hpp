#pragma once

#include "damctl/hawkes.hpp"
#include "damctl/model.hpp"
#include "damctl/rng.hpp"

#include <vector>

namespace damctl {

struct DamState {
    double h;
    double lambda;
    Regime regime = Regime::Closed;
    double t = 0.0;
    bool failed = false;  ///< the level reached h_max (absorbing)
};

struct Decision {
    bool switch_regime = false;
    double beta = 0.0;  ///< spill coefficient applied in the post-switch regime
};

/// Feedback control evaluated at decision epochs. The returned beta must lie in
/// [beta_floor(post-switch regime, h, lambda), beta_max].
class Policy {
public:
    virtual ~Policy() = default;
    virtual Decision decide(const DamState& state) const = 0;
};

/// Never switches; spills at the low-flow floor.
class FloorPolicy final : public Policy {
public:
    explicit FloorPolicy(const ModelConfig& cfg) : cfg_(cfg) {}
    Decision decide(const DamState& s) const override;

private:
    ModelConfig cfg_;
};

/// Never switches; spills at a constant coefficient.
class ConstantPolicy final : public Policy {
public:
    explicit ConstantPolicy(double beta) : beta_(beta) {}
    Decision decide(const DamState&) const override { return {false, beta_}; }

private:
    double beta_;
};

/// Discounted components of the reward functional along one path.
struct RewardAccumulator {
    double production = 0.0;
    double penalties = 0.0;
    double switch_costs = 0.0;
    double terminal_penalty = 0.0;

    long jumps = 0;
    long switches = 0;
    bool failed = false;
    double end_time = 0.0;
    bool empty_hit = false;   ///< the level was clamped at h_min at least once
    bool truncated = false;   ///< max_events reached before t_cut

    double total() const noexcept { return production - penalties - switch_costs - terminal_penalty; }
};

enum class PathEventKind { Jump, Switch, Failure };

struct PathEvent {
    PathEventKind kind;
    double t;
    double h;
    double lambda;
    Regime regime;
};

/// Integrates the level between jumps with RK4 substeps no longer than
/// cfg.simulation.dt_int; the intensity decays exactly. The level never
/// increases and is clamped at h_min, where outflow stops.
DamState drift_step(const ModelConfig& cfg, const DamState& state, double beta, double dt);

/// Adds the mark to the level and c * mark to the intensity; overtopping is absorbing.
DamState apply_jump(const ModelConfig& cfg, const DamState& state, double mark);

/// Runs one controlled path until failure or t_cut and returns its discounted
/// reward decomposition. Decisions are taken on the epoch grid k * dt_dec and
/// right after every jump. Throws std::invalid_argument on an infeasible beta.
RewardAccumulator simulate_controlled(const ModelConfig& cfg, const Policy& policy, const DamState& x0,
                                      Rng& rng, double t_cut, std::vector<PathEvent>* log = nullptr);

} // namespace damctl
