#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "storagedp/backend.hpp"
#include "storagedp/bidding.hpp"
#include "storagedp/dp.hpp"
#include "storagedp/grid.hpp"
#include "storagedp/model.hpp"

namespace storagedp {

enum class Strategy { PerfectForesight, Bids, SelfSchedule, Myopic, DischargeRestricted };

inline const char* to_string(Strategy s) noexcept {
    switch (s) {
        case Strategy::PerfectForesight: return "perfect";
        case Strategy::Bids: return "bids";
        case Strategy::SelfSchedule: return "self";
        case Strategy::Myopic: return "myopic";
        case Strategy::DischargeRestricted: return "restricted";
    }
    return "unknown";
}

struct StageRecord {
    std::size_t stage;
    Price realized;
    Megawatts power;
    MegawattHours soc;
};

struct SimulationResult {
    Strategy strategy{};
    double profit = 0.0;
    DispatchSchedule dispatch;
    std::vector<StageRecord> per_stage;
};

namespace detail {

inline void check_horizon(std::size_t n, const StorageParams& params, const char* what) {
    if (n != params.horizon)
        throw ConfigError(std::string(what) + " has " + std::to_string(n) + " stages, horizon is " +
                          std::to_string(params.horizon));
}

inline void record(SimulationResult& res, std::size_t t, Price realized, Megawatts p, MegawattHours s) {
    res.dispatch.powers.push_back(p);
    res.dispatch.socs.push_back(s);
    res.per_stage.push_back({t, realized, p, s});
    res.profit += realized * p;
}

inline SimulationResult settle_fixed_schedule(Strategy tag, const DispatchSchedule& schedule,
                                              std::span<const double> realized) {
    SimulationResult res;
    res.strategy = tag;
    for (std::size_t t = 0; t < realized.size(); ++t)
        record(res, t, realized[t], schedule.powers[t], schedule.socs[t]);
    return res;
}

}  // namespace detail

/// Rolling price-taker bidding: each hour a curve is rebuilt from the actual
/// state of charge and cleared against the realized price.
inline SimulationResult simulate_bidding(const ValueTable& table, std::span<const double> realized,
                                         const StorageParams& params) {
    params.validate();
    detail::check_horizon(realized.size(), params, "realized price series");
    detail::check_horizon(table.horizon(), params, "value table");
    detail::check_grid_matches(table.grid, params);

    SimulationResult res;
    res.strategy = Strategy::Bids;
    double s = params.initial_soc;
    for (std::size_t t = 0; t < realized.size(); ++t) {
        const auto curve = make_bid_curve(table, t, s);
        const Megawatts p = clear_bid(curve, realized[t]);
        s = settle_state(s + transition(p, params.efficiency), params);
        detail::record(res, t, realized[t], p, s);
    }
    return res;
}

/// Clears each curve against a proxy price (normally the previous hour's
/// realized price) before the real price is known, then settles at the real
/// price. lagged[t] is the proxy for interval t.
inline SimulationResult simulate_self_schedule(const ValueTable& table, std::span<const double> realized,
                                               std::span<const double> lagged, const StorageParams& params) {
    params.validate();
    detail::check_horizon(realized.size(), params, "realized price series");
    detail::check_horizon(lagged.size(), params, "lagged price series");
    detail::check_horizon(table.horizon(), params, "value table");
    detail::check_grid_matches(table.grid, params);

    SimulationResult res;
    res.strategy = Strategy::SelfSchedule;
    double s = params.initial_soc;
    for (std::size_t t = 0; t < realized.size(); ++t) {
        const auto curve = make_bid_curve(table, t, s);
        const auto interval = feasible_action_interval(s, params);
        Megawatts p = clear_bid(curve, lagged[t]);
        if (!interval.contains(p)) p = std::clamp(p, interval.lo, interval.hi);
        s = settle_state(s + transition(p, params.efficiency), params);
        detail::record(res, t, realized[t], p, s);
    }
    return res;
}

/// lagged[0] = prior, lagged[t] = realized[t-1].
inline std::vector<double> lag_series(std::span<const double> realized, double prior) {
    std::vector<double> out;
    out.reserve(realized.size());
    if (realized.empty()) return out;
    out.push_back(prior);
    out.insert(out.end(), realized.begin(), realized.end() - 1);
    return out;
}

/// Quantities from a deterministic solve on day-ahead prices, settled at
/// real-time prices.
inline SimulationResult simulate_myopic(std::span<const double> da_prices, std::span<const double> realized,
                                        const StorageParams& params, const Grid& grid,
                                        const KernelSet& backend) {
    detail::check_horizon(da_prices.size(), params, "day-ahead price series");
    detail::check_horizon(realized.size(), params, "realized price series");
    const auto sol = solve_deterministic(da_prices, params, grid, backend);
    return detail::settle_fixed_schedule(Strategy::Myopic, sol.schedule, realized);
}

/// Default perfect-foresight resolution: one percent of the energy capacity,
/// or the configured step if that is finer.
inline MegawattHours perfect_foresight_delta(const StorageParams& params, MegawattHours configured) {
    return std::min(0.01 * params.energy_cap, configured);
}

/// Clairvoyant benchmark: a deterministic solve on the realized prices.
inline SimulationResult perfect_foresight(std::span<const double> realized, const StorageParams& params,
                                          const Grid& fine_grid, const KernelSet& backend) {
    detail::check_horizon(realized.size(), params, "realized price series");
    const auto sol = solve_deterministic(realized, params, fine_grid, backend);
    return detail::settle_fixed_schedule(Strategy::PerfectForesight, sol.schedule, realized);
}

/// Deterministic dispatch with discharge forbidden whenever the price is <= 0.
inline SimulationResult simulate_discharge_restricted(std::span<const double> realized,
                                                      const StorageParams& params, const Grid& grid,
                                                      const KernelSet& backend) {
    detail::check_horizon(realized.size(), params, "realized price series");
    BackwardOptions opts;
    opts.prohibit_discharge_at_nonpositive_price = true;
    const auto sol = solve_deterministic(realized, params, grid, backend, opts);
    return detail::settle_fixed_schedule(Strategy::DischargeRestricted, sol.schedule, realized);
}

/// Shifts a series down so its maximum is exactly zero.
inline std::vector<double> build_negative_price_series(std::span<const double> prices) {
    if (prices.empty()) throw ConfigError("price series is empty");
    for (double p : prices)
        if (!std::isfinite(p)) throw DataError("prices must be finite");
    const double top = *std::max_element(prices.begin(), prices.end());
    std::vector<double> out(prices.begin(), prices.end());
    for (double& p : out) p -= top;
    return out;
}

inline double capture_ratio(double profit, double perfect_value) {
    return perfect_value == 0.0 ? (profit == 0.0 ? 1.0 : 0.0) : profit / perfect_value;
}

}  // namespace storagedp
