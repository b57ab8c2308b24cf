#pragma once

#include "damctl/model.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace damctl {

/// Uniform (h, ell) lattice. Node (ih, il) has flat index ih * nl + il, so
/// storage is row-major in h then ell. The top row h = h_max carries the
/// Dirichlet condition.
class Grid {
public:
    Grid(int nh, int nl, double h_min, double h_max, double ell_min, double ell_max);
    explicit Grid(const ModelConfig& cfg);

    int nh() const noexcept { return nh_; }
    int nl() const noexcept { return nl_; }
    double j() const noexcept { return j_; }
    double k() const noexcept { return k_; }
    double h(int ih) const noexcept { return ih == nh_ - 1 ? h_max_ : h_min_ + ih * j_; }
    double ell(int il) const noexcept { return il == nl_ - 1 ? ell_max_ : ell_min_ + il * k_; }
    double h_min() const noexcept { return h_min_; }
    double h_max() const noexcept { return h_max_; }
    double ell_min() const noexcept { return ell_min_; }
    double ell_max() const noexcept { return ell_max_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(nh_) * nl_; }
    std::size_t index(int ih, int il) const noexcept { return static_cast<std::size_t>(ih) * nl_ + il; }

    int nearest_h(double h) const noexcept;
    int nearest_ell(double ell) const noexcept;

    /// The grid with both steps halved: (2 nh - 1) x (2 nl - 1) nodes.
    Grid refined() const { return Grid(2 * nh_ - 1, 2 * nl_ - 1, h_min_, h_max_, ell_min_, ell_max_); }

private:
    int nh_, nl_;
    double h_min_, h_max_, ell_min_, ell_max_;
    double j_, k_;
};

/// Paired value functions v0 (turbine closed) and v1 (turbine operating).
struct ValueField {
    std::array<std::vector<double>, 2> v;

    ValueField() = default;
    ValueField(std::size_t n, double init) : v{std::vector<double>(n, init), std::vector<double>(n, init)} {}

    std::vector<double>& operator[](Regime r) { return v[index_of(r)]; }
    const std::vector<double>& operator[](Regime r) const { return v[index_of(r)]; }
};

/// Member of the bang-bang candidate set {floor, beta_max}.
enum class BetaChoice : std::uint8_t { Floor = 0, Max = 1 };

struct PolicyField {
    std::array<std::vector<std::uint8_t>, 2> switch_regime;  ///< 1 where the obstacle branch wins
    std::array<std::vector<BetaChoice>, 2> beta;

    PolicyField() = default;
    explicit PolicyField(std::size_t n)
        : switch_regime{std::vector<std::uint8_t>(n, 0), std::vector<std::uint8_t>(n, 0)},
          beta{std::vector<BetaChoice>(n, BetaChoice::Floor), std::vector<BetaChoice>(n, BetaChoice::Floor)} {}
};

/// Numeric beta for a candidate choice at a node.
double beta_value(const ModelConfig& cfg, BetaChoice choice, Regime i, double h, double ell);

struct DriftCoefficients {
    double mu_h;    ///< level drift, never positive
    double mu_ell;  ///< a (b - ell)
};

DriftCoefficients drift_coefficients(const ModelConfig& cfg, Regime i, double h, double ell, double beta);

/// A neighbour of the chain: up to four grid nodes with bilinear weights.
struct StencilTarget {
    std::array<std::size_t, 4> node{};
    std::array<double, 4> weight{};
    int count = 0;
};

/// Transition law of the approximating chain at one node: the four upwind
/// neighbours followed by one (clamped, interpolated) jump target per mark.
struct TransitionStencil {
    std::vector<StencilTarget> targets;
    std::vector<double> probs;
    double dt;
    double q;
};

/// Bilinear weights of an arbitrary point, clamped into the grid.
StencilTarget interpolation_target(const Grid& grid, double h, double ell);

TransitionStencil build_stencil(const ModelConfig& cfg, const Grid& grid, Regime i, int ih, int il, double beta);

/// The discrete dynamic-programming operator with all stencils precomputed.
/// Continuation value of a node and beta candidate is
///   (sum_m p_m v_i(y_m) + G_i(h) dt) / (1 + rho dt),
/// the obstacle is v_{1-i} - kappa, and the update takes the larger.
class BellmanOperator {
public:
    BellmanOperator(const ModelConfig& cfg, const Grid& grid);

    const Grid& grid() const noexcept { return grid_; }

    /// Writes T(in) into out for rows [row_begin, row_end), both regimes, and
    /// returns the largest |out - in| written. Rows at h_max are set to -P.
    /// `policy` (optional) receives the switch decision and the beta candidate
    /// with the larger generator value (cont - v) / dt.
    double apply_rows(const ValueField& in, ValueField& out, PolicyField* policy, int row_begin, int row_end) const;

    double apply(const ValueField& in, ValueField& out, PolicyField* policy = nullptr) const {
        return apply_rows(in, out, policy, 0, grid_.nh());
    }

    /// Smallest local time step over interior nodes and candidates.
    double min_dt() const noexcept { return min_dt_; }

private:
    struct Coeffs {
        std::array<double, 4> p;  // upwind neighbours y1..y4
        double p_jump;            // j k ell / Q; multiplies the mark-averaged jump value
        double g_dt;              // G dt
        double denom;             // 1 + rho dt
        double dt;
    };
    struct JumpCorner {
        std::uint32_t node;
        double weight;  // bilinear weight times mark probability
    };

    Coeffs& coeffs(std::size_t node, int regime, int choice) { return coeffs_[(node * 2 + regime) * 2 + choice]; }
    const Coeffs& coeffs(std::size_t node, int regime, int choice) const {
        return coeffs_[(node * 2 + regime) * 2 + choice];
    }

    ModelConfig cfg_;
    Grid grid_;
    std::vector<std::array<std::uint32_t, 4>> neighbours_;
    std::vector<Coeffs> coeffs_;
    std::vector<JumpCorner> jumps_;  // corners_per_node_ entries per node
    std::size_t corners_per_node_;
    double min_dt_;
};

/// One Jacobi sweep of the value iteration.
std::pair<ValueField, PolicyField> bellman_update(const ModelConfig& cfg, const Grid& grid, const ValueField& v);

struct SolveOptions {
    double tol = 1e-8;
    long max_iter = 100000;
    int threads = 0;                    ///< 0: use worker_count()
    std::optional<double> initial;      ///< constant start value; 0 by default
    bool keep_history = true;
};

struct SolveResult {
    ValueField value;
    PolicyField policy;
    long iterations = 0;
    double residual = 0.0;  ///< sup-norm of T(v) - v at the returned field
    std::vector<double> history;
    double wall_time = 0.0;
};

/// Value iteration from a constant field until the sup-norm change drops
/// below tol. Throws NonConvergenceError after max_iter sweeps.
SolveResult solve(const ModelConfig& cfg, const Grid& grid, const SolveOptions& opts);

/// v - T(v) per node and regime; identically zero on the Dirichlet row.
ValueField hjb_residual(const ModelConfig& cfg, const Grid& grid, const ValueField& v);

/// Lowest interior level at which beta_max is chosen, per ell node; +inf when
/// beta_max is never chosen in that column.
std::vector<double> extract_threshold(const PolicyField& policy, const Grid& grid, Regime i);

} // namespace damctl
