#include "damctl/model.hpp"

#include "damctl/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace damctl {

double MarkDistribution::mean() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * probs[i];
    return m;
}

double MarkDistribution::second_moment() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * values[i] * probs[i];
    return m;
}

namespace {

void require(bool ok, const char* key, const std::string& msg) {
    if (!ok) throw ConfigError(key, msg);
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(15);
    os << x;
    return os.str();
}

} // namespace

std::vector<std::string> validate(const ModelConfig& cfg) {
    require(cfg.h0 < 0.0, "dam.h0", "turbine position must be negative (got " + fmt(cfg.h0) + ")");
    require(cfg.h_min >= 0.0, "dam.h_min", "bottom level must be >= 0");
    require(cfg.h_min < cfg.h_minus && cfg.h_minus < cfg.h_plus && cfg.h_plus < cfg.h_max,
            "economics.h_plus",
            "levels must satisfy h0 < 0 <= h_min < h_minus < h_plus < h_max (got h_min=" +
                fmt(cfg.h_min) + ", h_minus=" + fmt(cfg.h_minus) + ", h_plus=" + fmt(cfg.h_plus) +
                ", h_max=" + fmt(cfg.h_max) + ")");
    require(cfg.beta_max > 0.0, "dam.beta_max", "must be > 0");
    require(cfg.beta_min_base >= 0.0 && cfg.beta_min_base <= cfg.beta_max, "dam.beta_min_base",
            "must lie in [0, beta_max]");
    require(cfg.surface > 0.0, "dam.surface", "must be > 0");
    require(cfg.gravity > 0.0, "dam.gravity", "must be > 0");
    require(cfg.mu >= 0.0, "economics.mu", "must be >= 0");
    require(cfg.beta_floor_mode != BetaFloorMode::Paper || cfg.mu <= cfg.beta_max, "economics.mu",
            "must not exceed beta_max when the floor bounds beta directly");
    require(cfg.energy >= 0.0, "economics.energy", "must be >= 0");
    require(cfg.efficiency > 0.0 && cfg.efficiency <= 1.0, "economics.efficiency",
            "must lie in (0, 1]");
    require(cfg.kappa >= 0.0, "economics.kappa", "must be >= 0");
    require(cfg.rho > 0.0, "economics.rho", "must be > 0");
    require(cfg.penalty_coeff >= 0.0, "economics.penalty_coeff", "must be >= 0");
    require(cfg.a > 0.0, "hawkes.a", "must be > 0");
    require(cfg.b > 0.0, "hawkes.b", "must be > 0");
    require(cfg.c >= 0.0, "hawkes.c", "must be >= 0");

    const auto& m = cfg.marks;
    require(!m.values.empty(), "marks.values", "at least one mark is required");
    require(m.values.size() == m.probs.size(), "marks.probs",
            "expected " + std::to_string(m.values.size()) + " probabilities, got " +
                std::to_string(m.probs.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        require(m.values[i] > 0.0, "marks.values", "marks must be > 0");
        require(m.probs[i] > 0.0, "marks.probs", "probabilities must be > 0");
        if (i > 0)
            require(m.values[i] > m.values[i - 1], "marks.values", "marks must be strictly increasing");
        sum += m.probs[i];
    }
    require(std::abs(sum - 1.0) <= 1e-12, "marks.probs", "probabilities sum to " + fmt(sum) + ", expected 1");

    require(cfg.grid.nh >= 2, "grid.nh", "must be >= 2");
    require(cfg.grid.nl >= 2, "grid.nl", "must be >= 2");
    require(cfg.grid.ell_min > 0.0, "grid.ell_min", "must be > 0");
    require(cfg.grid.ell_max > cfg.grid.ell_min, "grid.ell_max", "must exceed ell_min");

    require(cfg.numerics.tol > 0.0, "numerics.tol", "must be > 0");
    require(cfg.numerics.max_iter > 0, "numerics.max_iter", "must be > 0");
    require(cfg.simulation.dt_int > 0.0, "simulation.dt_int", "must be > 0");
    require(cfg.simulation.dt_dec > 0.0, "simulation.dt_dec", "must be > 0");
    require(cfg.simulation.t_cut > 0.0, "simulation.t_cut", "must be > 0");
    require(cfg.simulation.max_events > 0, "simulation.max_events", "must be > 0");

    std::vector<std::string> warnings;
    if (cfg.branching_ratio() > 1.0)
        warnings.push_back("supercritical intensity: c*E[z] = " + fmt(cfg.c * m.mean()) +
                           " exceeds a = " + fmt(cfg.a) + " (branching ratio " +
                           fmt(cfg.branching_ratio()) + ")");
    if (cfg.kappa == 0.0)
        warnings.push_back("zero switching cost: the switching obstacle may chatter");
    return warnings;
}

double phi(const ModelConfig& cfg, double h) {
    if (!(h > cfg.h0)) throw DomainError("phi: water level " + fmt(h) + " is not above h0");
    return cfg.energy / (cfg.surface * cfg.gravity * cfg.efficiency * (h - cfg.h0));
}

double spill_rate(const ModelConfig& cfg, double beta, double h) {
    if (!(beta >= 0.0 && beta <= cfg.beta_max))
        throw DomainError("spill_rate: beta " + fmt(beta) + " outside [0, beta_max]");
    return beta * std::sqrt(2.0 * cfg.gravity * std::max(h - cfg.h0, 0.0));
}

double beta_floor(const ModelConfig& cfg, Regime i, double h, double ell) {
    if (ell > cfg.ell_bar) return 0.0;
    const double turbine = i == Regime::Operating ? phi(cfg, h) : 0.0;
    const double missing = std::max(cfg.mu - turbine, 0.0);
    if (cfg.beta_floor_mode == BetaFloorMode::Paper) return missing;
    return std::min(missing / std::sqrt(2.0 * cfg.gravity * (h - cfg.h0)), cfg.beta_max);
}

double penalty_high(const ModelConfig& cfg, double h) {
    const double d = std::max(h - cfg.h_plus, 0.0);
    return cfg.penalty_coeff * d * d;
}

double penalty_low(const ModelConfig& cfg, double h) {
    const double d = std::max(cfg.h_minus - h, 0.0);
    return cfg.penalty_coeff * d * d;
}

double running_reward(const ModelConfig& cfg, Regime i, double h) {
    const double production = i == Regime::Operating ? cfg.energy : 0.0;
    return production - penalty_high(cfg, h) - penalty_low(cfg, h);
}

} // namespace damctl
