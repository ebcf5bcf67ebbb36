#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "storagedp/errors.hpp"

namespace storagedp {

using Megawatts = double;
using MegawattHours = double;
using Price = double;  // $/MWh

/// Absolute tolerance (MWh) for every energy-bound and recursion check.
inline constexpr double kFeasibilityTol = 1e-9;

/// Physical description of a price-taking storage asset.
///
/// Sign convention used everywhere: p > 0 discharges (exports), p < 0 charges.
struct StorageParams {
    Megawatts power_cap = 1.0;
    MegawattHours energy_cap = 4.0;
    double efficiency = 1.0;  // one-way; round-trip efficiency is efficiency^2
    MegawattHours initial_soc = 0.0;
    std::size_t horizon = 1;

    void validate() const {
        if (!(power_cap > 0.0) || !std::isfinite(power_cap))
            throw ConfigError("power_cap must be positive and finite");
        if (!(energy_cap > 0.0) || !std::isfinite(energy_cap))
            throw ConfigError("energy_cap must be positive and finite");
        if (!(efficiency > 0.0 && efficiency <= 1.0))
            throw ConfigError("efficiency must lie in (0, 1]");
        if (!(initial_soc >= 0.0 && initial_soc <= energy_cap))
            throw ConfigError("initial_soc must lie in [0, energy_cap]");
        if (horizon < 1) throw ConfigError("horizon must be at least 1");
    }
};

struct DispatchSchedule {
    std::vector<Megawatts> powers;
    std::vector<MegawattHours> socs;  // socs[t] is the level after stage t
};

/// Signed change in stored energy caused by net power p.
inline MegawattHours transition(Megawatts p, double efficiency) noexcept {
    return p >= 0.0 ? -p / efficiency : -efficiency * p;
}

struct PowerInterval {
    Megawatts lo;
    Megawatts hi;

    bool contains(Megawatts p, double tol = kFeasibilityTol) const noexcept {
        return p >= lo - tol && p <= hi + tol;
    }
};

/// Continuous interval of feasible net power at incoming state s.
inline PowerInterval feasible_action_interval(MegawattHours s, const StorageParams& params) {
    if (!(s >= -kFeasibilityTol && s <= params.energy_cap + kFeasibilityTol))
        throw DomainError("state of charge " + std::to_string(s) + " outside [0, " +
                          std::to_string(params.energy_cap) + "]");
    const double eta = params.efficiency;
    const double headroom = std::max(0.0, params.energy_cap - s);
    const double stored = std::max(0.0, s);
    return {-std::min(params.power_cap, headroom / eta), std::min(params.power_cap, stored * eta)};
}

enum class ConstraintKind { PowerBound, EnergyBound, Recursion };

inline const char* to_string(ConstraintKind kind) noexcept {
    switch (kind) {
        case ConstraintKind::PowerBound: return "power_bound";
        case ConstraintKind::EnergyBound: return "energy_bound";
        case ConstraintKind::Recursion: return "soc_recursion";
    }
    return "unknown";
}

struct Violation {
    std::size_t stage;
    ConstraintKind kind;
    double magnitude;  // amount by which the constraint is exceeded
};

/// Checks power bounds, energy bounds and the SoC recursion of a net-power
/// schedule. Empty result means feasible.
inline std::vector<Violation> validate_schedule(const DispatchSchedule& schedule,
                                                const StorageParams& params) {
    if (schedule.powers.size() != params.horizon || schedule.socs.size() != params.horizon)
        throw ConfigError("schedule length does not match horizon " +
                          std::to_string(params.horizon));
    std::vector<Violation> out;
    double prev = params.initial_soc;
    for (std::size_t t = 0; t < params.horizon; ++t) {
        const double p = schedule.powers[t];
        const double s = schedule.socs[t];
        if (const double over = std::abs(p) - params.power_cap; over > kFeasibilityTol)
            out.push_back({t, ConstraintKind::PowerBound, over});
        if (s < -kFeasibilityTol)
            out.push_back({t, ConstraintKind::EnergyBound, -s});
        else if (s > params.energy_cap + kFeasibilityTol)
            out.push_back({t, ConstraintKind::EnergyBound, s - params.energy_cap});
        if (const double gap = std::abs(s - (prev + transition(p, params.efficiency)));
            gap > kFeasibilityTol)
            out.push_back({t, ConstraintKind::Recursion, gap});
        prev = s;
    }
    return out;
}

/// Number of stages where the split charge/discharge representation of the
/// schedule has p_c * p_d > 0. A net-power schedule cannot produce one, so
/// this is the audit counterpart of the MILP binary.
inline std::size_t count_simultaneous_charge_discharge(const DispatchSchedule& schedule) {
    std::size_t n = 0;
    for (double p : schedule.powers) {
        const double charge = std::max(-p, 0.0);
        const double discharge = std::max(p, 0.0);
        if (charge * discharge > 0.0) ++n;
    }
    return n;
}

}  // namespace storagedp
