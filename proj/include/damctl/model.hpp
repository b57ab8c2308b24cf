#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace damctl {

/// Turbine status: closed (no production) or operating.
enum class Regime : std::uint8_t { Closed = 0, Operating = 1 };

constexpr int index_of(Regime r) noexcept { return static_cast<int>(r); }
constexpr Regime other(Regime r) noexcept {
    return r == Regime::Closed ? Regime::Operating : Regime::Closed;
}
constexpr Regime regime_from_index(int i) noexcept {
    return i == 0 ? Regime::Closed : Regime::Operating;
}

/// How the low-flow obligation bounds the spill coefficient.
///   Paper:   beta >= max(mu - i*phi(h), 0) on low-flow periods.
///   Outflow: the total released flow i*phi + beta*sqrt(2g(h-h0)) must reach mu.
enum class BetaFloorMode : std::uint8_t { Paper, Outflow };

/// Discrete law of the rainfall marks (storm sizes, in meters of water).
struct MarkDistribution {
    std::vector<double> values;
    std::vector<double> probs;

    double mean() const noexcept;
    double second_moment() const noexcept;
    std::size_t size() const noexcept { return values.size(); }
};

struct GridConfig {
    int nh = 100;
    int nl = 100;
    double ell_min = 0.01;
    double ell_max = 3.0;
};

struct NumericsConfig {
    double tol = 1e-8;
    long max_iter = 100000;
};

struct SimulationConfig {
    double dt_int = 1e-2;  ///< RK4 substep bound
    double dt_dec = 5e-2;  ///< spacing of policy decision epochs
    double t_cut = 100.0;  ///< truncation horizon of the discounted reward
    long max_events = 100000;
};

/// Every physical, economic, rainfall and discretisation parameter of the
/// dam problem. Defaults are the central parameter set; the mark law
/// defaults to the normalized (0.25, 1/3, 5/12) triple.
struct ModelConfig {
    // dam geometry
    double h_max = 100.0;
    double h_min = 0.0;
    double h0 = -1.0;  ///< turbine position, below the reservoir bottom
    double beta_max = 1.2;
    double beta_min_base = 0.0;  ///< carried for completeness, never used on its own
    double surface = 1.0;
    double gravity = 9.806;

    // regulation and economics
    double h_plus = 80.0;
    double h_minus = 50.0;
    double ell_bar = 1.0;
    double mu = 0.4;
    double P = 0.0;
    double energy = 3.0;
    double efficiency = 0.95;  ///< 1 - chi
    double kappa = 3.0;
    double rho = 0.2;
    double penalty_coeff = 0.5e-3;
    BetaFloorMode beta_floor_mode = BetaFloorMode::Paper;

    // Hawkes intensity: d lambda = a (b - lambda) dt + c dZ
    double a = 0.3;
    double b = 0.01;
    double c = 0.1;
    MarkDistribution marks{{10.0, 15.0, 20.0}, {0.25, 1.0 / 3.0, 5.0 / 12.0}};

    GridConfig grid;
    NumericsConfig numerics;
    SimulationConfig simulation;

    /// c * E[z] / a; above one the intensity is explosive.
    double branching_ratio() const noexcept { return c * marks.mean() / a; }
};

/// Throws ConfigError naming the first violated invariant. Returns
/// non-fatal warnings (supercritical intensity, zero switching cost).
std::vector<std::string> validate(const ModelConfig& cfg);

/// Turbine extraction rate E / (S g (1-chi) (h - h0)). Throws DomainError if h <= h0.
double phi(const ModelConfig& cfg, double h);

/// Spillover flow beta * sqrt(2 g (h - h0)^+). Throws DomainError if beta is outside [0, beta_max].
double spill_rate(const ModelConfig& cfg, double beta, double h);

/// Lower bound on the spill coefficient imposed by the low-flow obligation.
double beta_floor(const ModelConfig& cfg, Regime i, double h, double ell);

double penalty_high(const ModelConfig& cfg, double h);
double penalty_low(const ModelConfig& cfg, double h);

/// i E - f_+(h) - f_-(h).
double running_reward(const ModelConfig& cfg, Regime i, double h);

} // namespace damctl
