#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "storagedp/backend.hpp"
#include "storagedp/errors.hpp"
#include "storagedp/grid.hpp"
#include "storagedp/matrix.hpp"
#include "storagedp/model.hpp"

namespace storagedp {

/// Stagewise-independent discrete price distributions: row t holds the
/// support and probabilities of the price in delivery interval t (0-based).
struct ScenarioSet {
    Matrix<double> prices;  // T x R
    Matrix<double> probs;   // T x R

    std::size_t horizon() const noexcept { return prices.rows(); }
    std::size_t samples() const noexcept { return prices.cols(); }

    /// One sample per stage with probability one.
    static ScenarioSet deterministic(std::span<const double> series) {
        ScenarioSet s{Matrix<double>(series.size(), 1), Matrix<double>(series.size(), 1, 1.0)};
        for (std::size_t t = 0; t < series.size(); ++t) s.prices(t, 0) = series[t];
        return s;
    }

    void validate() const {
        if (prices.rows() == 0 || prices.cols() == 0) throw ConfigError("scenario set is empty");
        require_same_shape(prices, probs, "ScenarioSet");
        for (double p : prices.flat())
            if (!std::isfinite(p)) throw DataError("scenario prices must be finite");
        for (std::size_t t = 0; t < probs.rows(); ++t) require_simplex(probs.row(t));
    }
};

/// Expected value vectors over the state grid, one row per stage boundary.
/// Row T is the terminal (all zero) row.
struct ValueTable {
    Grid grid;
    Matrix<double> values;                  // (T+1) x S
    std::vector<Matrix<ActionIndex>> policies;  // T entries of S x R when kept

    std::size_t horizon() const noexcept { return values.rows() == 0 ? 0 : values.rows() - 1; }
};

struct BackwardOptions {
    bool keep_policies = false;
    /// Forbid discharge in any sample whose price is <= 0 (the restriction
    /// used by analytic bidding methods; kept for comparison runs).
    bool prohibit_discharge_at_nonpositive_price = false;
};

namespace detail {

inline void check_grid_matches(const Grid& grid, const StorageParams& params) {
    if (grid.energy_cap != params.energy_cap || grid.power_cap != params.power_cap ||
        grid.efficiency != params.efficiency)
        throw ConfigError("grid was built for a different storage asset");
}

// Runs the stage loop and hands every finished V_t (t = T-1 .. 0) to `sink`.
template <class Sink>
void run_backward(const Grid& grid, const TransitionTables& tables, const ScenarioSet& scenarios,
                  const KernelSet& backend, const BackwardOptions& options,
                  std::vector<Matrix<ActionIndex>>* policies, Sink&& sink) {
    scenarios.validate();
    const std::size_t S = grid.num_states();
    const std::size_t P = grid.num_actions();
    if (tables.num_states() != S || tables.num_actions() != P)
        throw ConfigError("transition tables do not match the grid");
    if (policies && P > std::numeric_limits<ActionIndex>::max())
        throw ConfigError("too many actions to store policies");

    const std::size_t T = scenarios.horizon();
    std::vector<double> later(S, 0.0), current(S, 0.0);
    Matrix<double> next, payoff, q;
    if (policies) policies->assign(T, {});

    for (std::size_t t = T; t-- > 0;) {
        backend.gather_interpolate(later, tables, next);
        backend.mask_assign(next, tables.infeasible, kNegInf);
        backend.outer_payoff(grid.actions, scenarios.prices.row(t), payoff);
        if (options.prohibit_discharge_at_nonpositive_price) {
            for (std::size_t j = grid.zero_action() + 1; j < P; ++j)
                for (std::size_t r = 0; r < payoff.cols(); ++r)
                    if (scenarios.prices(t, r) <= 0.0) payoff(j, r) = kNegInf;
        }
        backend.broadcast_payoff_max(next, payoff, q, policies ? &(*policies)[t] : nullptr);
        backend.expectation(q, scenarios.probs.row(t), current);
        for (double v : current)
            if (!std::isfinite(v) || v < 0.0)
                throw InvariantError("stage " + std::to_string(t) + " produced value " + std::to_string(v));
        sink(t, std::span<const double>(current));
        std::swap(later, current);
    }
}

}  // namespace detail

/// Backward induction over the discretized state grid. The returned table
/// holds V_0 .. V_T; V_t is the expected value of entering interval t with a
/// given state of charge.
inline ValueTable backward_induction(const Grid& grid, const TransitionTables& tables,
                                     const ScenarioSet& scenarios, const KernelSet& backend,
                                     const BackwardOptions& options = {}) {
    ValueTable table;
    table.grid = grid;
    table.values.resize(scenarios.horizon() + 1, grid.num_states(), 0.0);
    detail::run_backward(grid, tables, scenarios, backend, options,
                         options.keep_policies ? &table.policies : nullptr,
                         [&](std::size_t t, std::span<const double> v) {
                             std::copy(v.begin(), v.end(), table.values.row(t).begin());
                         });
    return table;
}

/// Valuation-only variant: keeps two rows in memory and returns V_0.
inline std::vector<double> initial_values(const Grid& grid, const TransitionTables& tables,
                                          const ScenarioSet& scenarios, const KernelSet& backend,
                                          const BackwardOptions& options = {}) {
    std::vector<double> v0(grid.num_states(), 0.0);
    detail::run_backward(grid, tables, scenarios, backend, options, nullptr,
                         [&](std::size_t t, std::span<const double> v) {
                             if (t == 0) v0.assign(v.begin(), v.end());
                         });
    return v0;
}

/// Piecewise-linear interpolation of V_t at state s.
inline double value_at(const ValueTable& table, std::size_t t, MegawattHours s) {
    if (t > table.horizon()) throw DomainError("stage " + std::to_string(t) + " beyond horizon");
    const Grid& g = table.grid;
    if (!(s >= -kFeasibilityTol && s <= g.energy_cap + kFeasibilityTol))
        throw DomainError("state " + std::to_string(s) + " outside [0, energy_cap]");
    const auto row = table.values.row(t);
    const std::size_t last = row.size() - 1;
    const double x = detail::snap_to_integer(std::clamp(s, 0.0, g.energy_cap) / g.delta);
    const auto lo = std::min(static_cast<std::size_t>(std::floor(x)), last);
    const double w = x - static_cast<double>(lo);
    if (w == 0.0 || lo == last) return row[lo];
    return (1.0 - w) * row[lo] + w * row[lo + 1];
}

/// Keeps a simulated state inside [0, energy_cap] after floating-point drift.
inline MegawattHours settle_state(MegawattHours s, const StorageParams& params) {
    if (s < -kFeasibilityTol || s > params.energy_cap + kFeasibilityTol)
        throw InvariantError("state " + std::to_string(s) + " left [0, energy_cap]");
    return std::clamp(s, 0.0, params.energy_cap);
}

/// Actions open to the policy at state s, ascending: the grid actions that
/// are feasible at s plus both ends of the feasible interval. On grid states
/// the ends already are grid actions. Off the grid they are the only way to
/// fill or empty the battery exactly, since s + F(p) never returns to the
/// lattice for an interior action.
inline std::vector<Megawatts> candidate_actions(const Grid& g, MegawattHours s, const StorageParams& params) {
    const auto interval = feasible_action_interval(s, params);
    std::vector<Megawatts> out;
    out.reserve(g.actions.size() + 2);
    auto push = [&](Megawatts p) {
        if (out.empty() || p - out.back() > kFeasibilityTol) out.push_back(p);
    };
    push(interval.lo);
    for (Megawatts p : g.actions) {
        if (!interval.contains(p)) continue;
        // A grid action within tolerance of an interval end replaces it.
        if (out.size() == 1 && std::abs(p - out.back()) <= kFeasibilityTol)
            out.back() = p;
        else
            push(p);
    }
    if (std::abs(interval.hi - out.back()) > kFeasibilityTol) push(interval.hi);
    return out;
}

/// Best action at (possibly off-grid) state s against price lambda, scoring
/// each candidate by lambda*p + V_{t+1}(s + F(p)).
inline Megawatts greedy_action(const ValueTable& table, std::size_t t, MegawattHours s, Price lambda,
                               const StorageParams& params, bool prohibit_discharge = false) {
    double best = kNegInf;
    Megawatts best_p = 0.0;
    for (Megawatts p : candidate_actions(table.grid, s, params)) {
        if (prohibit_discharge && p > 0.0 && lambda <= 0.0) continue;
        const double next = std::clamp(s + transition(p, params.efficiency), 0.0, params.energy_cap);
        const double score = lambda * p + value_at(table, t + 1, next);
        if (score > best) {
            best = score;
            best_p = p;
        }
    }
    return best_p;
}

struct DeterministicSolution {
    double objective = 0.0;
    DispatchSchedule schedule;
    ValueTable table;
};

/// Perfect-information dispatch against a single price path: backward
/// induction with one sample per stage, then a forward pass from the initial
/// state that re-optimizes over the action list at the actual state.
inline DeterministicSolution solve_deterministic(std::span<const double> prices,
                                                 const StorageParams& params, const Grid& grid,
                                                 const KernelSet& backend,
                                                 const BackwardOptions& options = {}) {
    params.validate();
    detail::check_grid_matches(grid, params);
    if (prices.size() != params.horizon)
        throw ConfigError("price series length " + std::to_string(prices.size()) +
                          " does not match horizon " + std::to_string(params.horizon));
    for (double p : prices)
        if (!std::isfinite(p)) throw DataError("prices must be finite");

    const auto tables = build_transition_tables(grid);
    BackwardOptions opts = options;
    opts.keep_policies = false;
    DeterministicSolution sol;
    sol.table = backward_induction(grid, tables, ScenarioSet::deterministic(prices), backend, opts);

    double s = params.initial_soc;
    sol.schedule.powers.reserve(prices.size());
    sol.schedule.socs.reserve(prices.size());
    for (std::size_t t = 0; t < prices.size(); ++t) {
        const Megawatts p = greedy_action(sol.table, t, s, prices[t], params,
                                          options.prohibit_discharge_at_nonpositive_price);
        s = settle_state(s + transition(p, params.efficiency), params);
        sol.schedule.powers.push_back(p);
        sol.schedule.socs.push_back(s);
        sol.objective += prices[t] * p;
    }
    return sol;
}

inline StorageParams with_horizon(StorageParams params, std::size_t horizon) {
    params.horizon = horizon;
    return params;
}

}  // namespace storagedp
