#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "storagedp/errors.hpp"
#include "storagedp/matrix.hpp"
#include "storagedp/model.hpp"

namespace storagedp {

/// Discretized states and the recombining action list.
///
/// Interior charge actions are -k*delta/eta and interior discharge actions
/// k*delta*eta, so their energy effect is an exact multiple of delta. Only the
/// two endpoints (+-power_cap) may land between state grid points.
struct Grid {
    MegawattHours delta = 0.0;
    MegawattHours energy_cap = 0.0;
    Megawatts power_cap = 0.0;
    double efficiency = 1.0;
    std::vector<MegawattHours> states;  // ascending, states.front() == 0, states.back() == energy_cap
    std::vector<Megawatts> actions;     // ascending, exactly one zero
    std::size_t n_charge = 0;
    std::size_t n_discharge = 0;

    std::size_t num_states() const noexcept { return states.size(); }
    std::size_t num_actions() const noexcept { return actions.size(); }
    /// Column holding the zero action.
    std::size_t zero_action() const noexcept { return n_charge; }
};

struct TransitionTables {
    Matrix<double> next_level;        // S x P, unclamped next-state energy
    Matrix<std::int32_t> z_low;       // S x P state indices
    Matrix<std::int32_t> z_high;      // S x P state indices
    Matrix<double> interp_weight;     // S x P, weight on z_high
    Matrix<std::uint8_t> infeasible;  // S x P

    std::size_t num_states() const noexcept { return next_level.rows(); }
    std::size_t num_actions() const noexcept { return next_level.cols(); }
};

namespace detail {

// Ratios such as 1/(0.1*0.5) come out as 20.000000000000004; treat anything
// within this many units of an integer as that integer.
inline constexpr double kIntegerSnap = 1e-9;

inline double robust_ceil(double x) {
    const double r = std::round(x);
    return std::abs(x - r) <= kIntegerSnap * std::max(1.0, std::abs(x)) ? r : std::ceil(x);
}

inline double snap_to_integer(double x) {
    const double r = std::round(x);
    return std::abs(x - r) <= kIntegerSnap ? r : x;
}

}  // namespace detail

/// [0, delta, 2*delta, ..., energy_cap]. energy_cap/delta must be an integer.
inline std::vector<MegawattHours> build_state_grid(MegawattHours energy_cap, MegawattHours delta) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("delta must be positive");
    if (!(energy_cap > 0.0)) throw ConfigError("energy_cap must be positive");
    const double ratio = energy_cap / delta;
    const double steps = std::round(ratio);
    if (steps < 1.0 || std::abs(ratio - steps) > detail::kIntegerSnap * std::max(1.0, ratio))
        throw ConfigError("energy_cap/delta = " + std::to_string(ratio) + " is not an integer");
    const auto n = static_cast<std::size_t>(steps);
    std::vector<MegawattHours> states(n + 1);
    for (std::size_t k = 0; k <= n; ++k) states[k] = static_cast<double>(k) * delta;
    states.back() = energy_cap;
    return states;
}

struct ActionGrid {
    std::vector<Megawatts> actions;
    std::size_t n_charge;
    std::size_t n_discharge;
};

inline ActionGrid build_action_grid(Megawatts power_cap, double efficiency, MegawattHours delta) {
    if (!(power_cap > 0.0)) throw ConfigError("power_cap must be positive");
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");
    if (!(efficiency > 0.0 && efficiency <= 1.0)) throw ConfigError("efficiency must lie in (0, 1]");

    const auto n_charge = static_cast<std::size_t>(detail::robust_ceil(power_cap * efficiency / delta));
    const auto n_discharge =
        static_cast<std::size_t>(detail::robust_ceil(power_cap / (delta * efficiency)));

    ActionGrid g{{}, n_charge, n_discharge};
    g.actions.reserve(n_charge + n_discharge + 1);
    for (std::size_t k = n_charge; k >= 1; --k) {
        const double mag = k == n_charge ? power_cap
                                         : std::min(static_cast<double>(k) * delta / efficiency, power_cap);
        g.actions.push_back(-mag);
    }
    g.actions.push_back(0.0);
    for (std::size_t k = 1; k <= n_discharge; ++k) {
        const double mag = k == n_discharge ? power_cap
                                            : std::min(static_cast<double>(k) * delta * efficiency, power_cap);
        g.actions.push_back(mag);
    }
    return g;
}

inline Grid make_grid(const StorageParams& params, MegawattHours delta) {
    params.validate();
    Grid g;
    g.delta = delta;
    g.energy_cap = params.energy_cap;
    g.power_cap = params.power_cap;
    g.efficiency = params.efficiency;
    g.states = build_state_grid(params.energy_cap, delta);
    auto ag = build_action_grid(params.power_cap, params.efficiency, delta);
    g.actions = std::move(ag.actions);
    g.n_charge = ag.n_charge;
    g.n_discharge = ag.n_discharge;
    return g;
}

/// Stage-invariant next-state levels, bracketing indices, interpolation
/// weights and the infeasibility mask. Built once, shared by every stage.
inline TransitionTables build_transition_tables(const Grid& grid) {
    const std::size_t S = grid.num_states();
    const std::size_t P = grid.num_actions();
    if (S < 2 || P < 1) throw ConfigError("grid is empty");
    const double cap = grid.energy_cap;

    TransitionTables tt;
    tt.next_level.resize(S, P);
    tt.z_low.resize(S, P);
    tt.z_high.resize(S, P);
    tt.interp_weight.resize(S, P);
    tt.infeasible.resize(S, P);

    const auto last = static_cast<std::int32_t>(S - 1);
    for (std::size_t i = 0; i < S; ++i) {
        for (std::size_t j = 0; j < P; ++j) {
            const double sigma = grid.states[i] + transition(grid.actions[j], grid.efficiency);
            tt.next_level(i, j) = sigma;
            tt.infeasible(i, j) = (sigma < -kFeasibilityTol || sigma > cap + kFeasibilityTol) ? 1 : 0;

            const double z = detail::snap_to_integer(std::clamp(sigma, 0.0, cap) / grid.delta);
            auto lo = static_cast<std::int32_t>(std::floor(z));
            auto hi = static_cast<std::int32_t>(std::ceil(z));
            lo = std::clamp(lo, std::int32_t{0}, last);
            hi = std::clamp(hi, std::int32_t{0}, last);
            tt.z_low(i, j) = lo;
            tt.z_high(i, j) = hi;
            tt.interp_weight(i, j) = hi == lo ? 0.0 : (z - lo) / static_cast<double>(hi - lo);
        }
    }
    return tt;
}

}  // namespace storagedp
