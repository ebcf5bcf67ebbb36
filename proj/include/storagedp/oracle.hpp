#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "storagedp/dp.hpp"
#include "storagedp/errors.hpp"
#include "storagedp/grid.hpp"
#include "storagedp/model.hpp"

// Independent ground truth for the tensor solver. Nothing in here touches
// transition tables or kernels: feasibility comes from the interval of the
// storage model and next states are tracked as plain numbers.

namespace storagedp::oracle {

struct Limits {
    double max_sequences = 1e7;  // P^T for exhaustive enumeration
    double max_paths = 1e6;      // R^T for unmemoized expectimax
    std::size_t max_reachable_states = 5'000'000;
};

struct Instance {
    StorageParams params;
    Grid grid;
    ScenarioSet scenarios;
    Limits limits;

    std::size_t horizon() const noexcept { return scenarios.horizon(); }
};

struct DeterministicResult {
    double objective = 0.0;
    DispatchSchedule schedule;
};

namespace detail {

inline double power_count(double base, std::size_t exp) { return std::pow(base, static_cast<double>(exp)); }

inline void check_instance(const Instance& inst) {
    inst.params.validate();
    inst.scenarios.validate();
    if (inst.params.horizon != inst.horizon())
        throw ConfigError("instance horizon does not match scenario count");
}

/// Grid actions that keep s inside [0, energy_cap], plus the largest charge
/// and discharge the battery allows at s (so an off-grid level can still be
/// filled or emptied exactly). Written out from the physics rather than
/// through candidate_actions so the oracles do not share the policy's code.
inline std::vector<double> moves(const Instance& inst, double s) {
    const auto& par = inst.params;
    std::vector<double> out;
    for (double p : inst.grid.actions) {
        if (std::abs(p) > par.power_cap + kFeasibilityTol) continue;
        const double next = s + transition(p, par.efficiency);
        if (next < -kFeasibilityTol || next > par.energy_cap + kFeasibilityTol) continue;
        out.push_back(p);
    }
    const double fill = -std::min(par.power_cap, std::max(0.0, par.energy_cap - s) / par.efficiency);
    const double drain = std::min(par.power_cap, std::max(0.0, s) * par.efficiency);
    for (double end : {fill, drain}) {
        bool known = false;
        for (double p : out) known = known || std::abs(p - end) <= kFeasibilityTol;
        if (!known) out.push_back(end);
    }
    return out;
}

inline std::vector<double> single_path(const Instance& inst) {
    if (inst.scenarios.samples() != 1) throw ConfigError("deterministic oracle needs exactly one sample per stage");
    std::vector<double> prices(inst.horizon());
    for (std::size_t t = 0; t < prices.size(); ++t) prices[t] = inst.scenarios.prices(t, 0);
    return prices;
}

}  // namespace detail

/// Tries every feasible action sequence depth-first (at most (P+2)^T of them,
/// counting the two interval ends) and keeps the most profitable one.
inline DeterministicResult exhaustive_deterministic(const Instance& inst) {
    detail::check_instance(inst);
    const auto prices = detail::single_path(inst);
    const std::size_t T = prices.size();
    if (detail::power_count(static_cast<double>(inst.grid.actions.size() + 2), T) > inst.limits.max_sequences)
        throw ConfigError("exhaustive search refused: (P+2)^T exceeds " + std::to_string(inst.limits.max_sequences));

    const auto& par = inst.params;
    DeterministicResult best{-std::numeric_limits<double>::infinity(), {}};
    std::vector<double> powers(T), socs(T);

    std::function<void(std::size_t, double, double)> dfs = [&](std::size_t t, double s, double profit) {
        if (t == T) {
            if (profit > best.objective) best = {profit, {powers, socs}};
            return;
        }
        for (double p : detail::moves(inst, s)) {
            const double next = s + transition(p, par.efficiency);
            powers[t] = p;
            socs[t] = next;
            dfs(t + 1, next, profit + prices[t] * p);
        }
    };
    dfs(0, par.initial_soc, 0.0);
    if (!validate_schedule(best.schedule, par).empty())
        throw InvariantError("exhaustive search produced an infeasible schedule");
    return best;
}

/// Same optimum as exhaustive_deterministic, found by merging action
/// sequences that reach the same state of charge. States are keyed by their
/// level rounded to 1e-12 MWh, so off-lattice levels reached through the
/// +-power_cap endpoints stay distinct while recombining paths merge. The
/// interval ends pull such levels back to 0 or energy_cap.
inline DeterministicResult exhaustive_reachable(const Instance& inst) {
    detail::check_instance(inst);
    const auto prices = detail::single_path(inst);
    const auto& par = inst.params;

    struct Node {
        double s;
        double value;
        std::int64_t parent;
        double action;
    };
    auto key_of = [](double s) { return static_cast<std::int64_t>(std::llround(s * 1e12)); };

    std::vector<std::vector<Node>> layers(prices.size() + 1);
    layers[0].push_back({par.initial_soc, 0.0, -1, 0.0});
    for (std::size_t t = 0; t < prices.size(); ++t) {
        std::unordered_map<std::int64_t, std::size_t> index;
        auto& out = layers[t + 1];
        const auto& in = layers[t];
        for (std::size_t n = 0; n < in.size(); ++n) {
            for (double p : detail::moves(inst, in[n].s)) {
                const double next = in[n].s + transition(p, par.efficiency);
                const double value = in[n].value + prices[t] * p;
                auto [it, fresh] = index.try_emplace(key_of(next), out.size());
                if (fresh) {
                    out.push_back({next, value, static_cast<std::int64_t>(n), p});
                    if (out.size() > inst.limits.max_reachable_states)
                        throw ConfigError("reachable-state search refused: too many distinct states");
                } else if (value > out[it->second].value) {
                    out[it->second] = {next, value, static_cast<std::int64_t>(n), p};
                }
            }
        }
    }

    const auto& last = layers.back();
    std::size_t best = 0;
    for (std::size_t n = 1; n < last.size(); ++n)
        if (last[n].value > last[best].value) best = n;

    DeterministicResult res{last[best].value, {std::vector<double>(prices.size()), std::vector<double>(prices.size())}};
    std::int64_t cur = static_cast<std::int64_t>(best);
    for (std::size_t t = prices.size(); t-- > 0;) {
        const Node& node = layers[t + 1][static_cast<std::size_t>(cur)];
        res.schedule.powers[t] = node.action;
        res.schedule.socs[t] = node.s;
        cur = node.parent;
    }
    if (!validate_schedule(res.schedule, par).empty())
        throw InvariantError("reachable-state search produced an infeasible schedule");
    return res;
}

/// Expected value at the initial state of the discretized stochastic DP,
/// evaluated by plain recursion over (stage, grid state). Values between
/// grid points are linear interpolations of the neighbouring grid values,
/// which is how the discretized problem defines them.
inline double expectimax(const Instance& inst, bool memoize = true) {
    detail::check_instance(inst);
    const std::size_t T = inst.horizon();
    if (!memoize &&
        detail::power_count(static_cast<double>(inst.scenarios.samples()), T) > inst.limits.max_paths)
        throw ConfigError("unmemoized expectimax refused: R^T exceeds " + std::to_string(inst.limits.max_paths));

    const auto& par = inst.params;
    const auto& g = inst.grid;
    const std::size_t S = g.states.size();
    std::map<std::pair<std::size_t, std::size_t>, double> memo;

    std::function<double(std::size_t, std::size_t)> value;
    auto at_level = [&](std::size_t t, double level) {
        const double pos = std::clamp(level, 0.0, par.energy_cap) / g.delta;
        const double nearest = std::round(pos);
        if (std::abs(pos - nearest) <= 1e-9) return value(t, static_cast<std::size_t>(nearest));
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        if (lo + 1 >= S) return value(t, S - 1);
        const double w = pos - static_cast<double>(lo);
        return (1.0 - w) * value(t, lo) + w * value(t, lo + 1);
    };
    value = [&](std::size_t t, std::size_t i) -> double {
        if (t == T) return 0.0;
        if (memoize) {
            if (auto it = memo.find({t, i}); it != memo.end()) return it->second;
        }
        const double s = g.states[i];
        const auto interval = feasible_action_interval(s, par);
        double expected = 0.0;
        for (std::size_t r = 0; r < inst.scenarios.samples(); ++r) {
            const double lambda = inst.scenarios.prices(t, r);
            double best = -std::numeric_limits<double>::infinity();
            for (double p : g.actions) {
                if (!interval.contains(p)) continue;
                best = std::max(best, lambda * p + at_level(t + 1, s + transition(p, par.efficiency)));
            }
            expected += inst.scenarios.probs(t, r) * best;
        }
        if (memoize) memo[{t, i}] = expected;
        return expected;
    };
    return at_level(0, par.initial_soc);
}

// LP export ------------------------------------------------------------------

enum class LpVariant {
    Milp,        // binary z_t
    Relaxed,     // z_t in [0, 1]
    Restricted,  // relaxed, and p_d_t = 0 wherever the price is <= 0
};

inline const char* to_string(LpVariant v) noexcept {
    switch (v) {
        case LpVariant::Milp: return "milp";
        case LpVariant::Relaxed: return "relaxed";
        case LpVariant::Restricted: return "restricted";
    }
    return "unknown";
}

inline LpVariant parse_lp_variant(const std::string& name) {
    if (name == "milp" || name == "exact") return LpVariant::Milp;
    if (name == "relaxed") return LpVariant::Relaxed;
    if (name == "restricted") return LpVariant::Restricted;
    throw ConfigError("unknown LP variant '" + name + "' (expected milp|relaxed|restricted)");
}

namespace detail {

inline std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline std::string term(double coef, const std::string& var) {
    return (coef < 0.0 ? " - " : " + ") + num(std::abs(coef)) + " " + var;
}

}  // namespace detail

/// Writes the split charge/discharge model with complementarity binaries in
/// CPLEX LP text format. Variables per stage t = 1..T, in this order:
/// p_c_t, p_d_t, s_t, z_t.
inline void export_lp(std::ostream& os, std::span<const double> prices, const StorageParams& params,
                      LpVariant variant) {
    params.validate();
    if (prices.size() != params.horizon) throw ConfigError("price series length does not match horizon");
    const std::size_t T = prices.size();
    const double eta = params.efficiency;
    auto var = [](const char* base, std::size_t t) { return std::string(base) + "_" + std::to_string(t); };

    os << "\\ storage arbitrage, T=" << T << ", variant=" << to_string(variant) << "\n";
    os << "Maximize\n obj:";
    for (std::size_t t = 1; t <= T; ++t) {
        os << detail::term(prices[t - 1], var("p_d", t)) << detail::term(-prices[t - 1], var("p_c", t));
    }
    os << "\nSubject To\n";
    for (std::size_t t = 1; t <= T; ++t) {
        os << " soc_" << t << ":" << detail::term(1.0, var("s", t));
        if (t > 1) os << detail::term(-1.0, var("s", t - 1));
        os << detail::term(-eta, var("p_c", t)) << detail::term(1.0 / eta, var("p_d", t)) << " = "
           << detail::num(t == 1 ? params.initial_soc : 0.0) << "\n";
        os << " charge_cap_" << t << ":" << detail::term(1.0, var("p_c", t))
           << detail::term(-params.power_cap, var("z", t)) << " <= 0\n";
        os << " discharge_cap_" << t << ":" << detail::term(1.0, var("p_d", t))
           << detail::term(params.power_cap, var("z", t)) << " <= " << detail::num(params.power_cap) << "\n";
    }
    os << "Bounds\n";
    for (std::size_t t = 1; t <= T; ++t) {
        os << " 0 <= " << var("p_c", t) << " <= " << detail::num(params.power_cap) << "\n";
        if (variant == LpVariant::Restricted && prices[t - 1] <= 0.0)
            os << " " << var("p_d", t) << " = 0\n";
        else
            os << " 0 <= " << var("p_d", t) << " <= " << detail::num(params.power_cap) << "\n";
        os << " 0 <= " << var("s", t) << " <= " << detail::num(params.energy_cap) << "\n";
        os << " 0 <= " << var("z", t) << " <= 1\n";
    }
    if (variant == LpVariant::Milp) {
        os << "Binaries\n";
        for (std::size_t t = 1; t <= T; ++t) os << " " << var("z", t) << "\n";
    }
    os << "End\n";
}

// Random instances -------------------------------------------------------------

struct RandomShape {
    std::size_t max_T = 4;
    std::size_t max_S = 5;
    std::size_t max_R = 3;
};

namespace detail {

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> w(n);
    double sum = 0.0;
    for (auto& x : w) sum += (x = u(rng));
    for (auto& x : w) x /= sum;
    return w;
}

inline Instance assemble(std::mt19937_64& rng, StorageParams params, double delta, std::size_t T, std::size_t R) {
    params.horizon = T;
    Instance inst;
    inst.grid = make_grid(params, delta);
    std::uniform_int_distribution<std::size_t> pick_state(0, inst.grid.states.size() - 1);
    params.initial_soc = inst.grid.states[pick_state(rng)];
    inst.params = params;
    std::uniform_real_distribution<double> price(-30.0, 60.0);
    inst.scenarios = {Matrix<double>(T, R), Matrix<double>(T, R)};
    for (std::size_t t = 0; t < T; ++t) {
        const auto probs = random_simplex(rng, R);
        for (std::size_t r = 0; r < R; ++r) {
            inst.scenarios.prices(t, r) = std::round(price(rng) * 100.0) / 100.0;
            inst.scenarios.probs(t, r) = probs[r];
        }
    }
    return inst;
}

}  // namespace detail

/// Small stochastic instance with at most 5 actions. About half of them use
/// a non-unit efficiency whose endpoint actions land between grid points.
inline Instance random_stochastic_instance(std::uint64_t seed, const RandomShape& shape = {}) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_T(1, shape.max_T), pick_S(2, shape.max_S),
        pick_R(1, shape.max_R), pick_kind(0, 3);
    const std::size_t T = pick_T(rng), S = pick_S(rng), R = pick_R(rng);
    const double delta = std::uniform_int_distribution<int>(0, 1)(rng) ? 0.5 : 1.0;
    StorageParams params;
    params.energy_cap = delta * static_cast<double>(S - 1);
    switch (pick_kind(rng)) {
        case 0:  // lossless, two multiples each side: P = 5
            params.efficiency = 1.0;
            params.power_cap = 2.0 * delta;
            break;
        case 1:  // lossless, P = 3
            params.efficiency = 1.0;
            params.power_cap = delta;
            break;
        default:  // lossy, P = 4, endpoints off the lattice
            params.efficiency = std::uniform_real_distribution<double>(0.55, 0.98)(rng);
            params.power_cap = delta;
            break;
    }
    return detail::assemble(rng, params, delta, T, R);
}

/// Deterministic (R = 1) instance whose every action, endpoints included,
/// moves the state by an exact multiple of delta, so the discretized DP and
/// enumeration over continuous states describe the same problem.
inline Instance random_recombining_instance(std::uint64_t seed, std::size_t max_T = 6, std::size_t max_S = 6) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_T(1, max_T), pick_S(2, max_S), pick_kind(0, 3);
    const std::size_t T = pick_T(rng), S = pick_S(rng);
    const double power_cap = std::uniform_int_distribution<int>(0, 1)(rng) ? 1.0 : 2.0;
    StorageParams params;
    params.power_cap = power_cap;
    double delta = power_cap;
    switch (pick_kind(rng)) {
        case 0:  // P = 3
            params.efficiency = 1.0;
            break;
        case 1:  // P = 5
            params.efficiency = 1.0;
            delta = power_cap / 2.0;
            break;
        case 2:  // charge F = +delta, discharge steps -delta, -2 delta: P = 4
            params.efficiency = 1.0 / std::sqrt(2.0);
            delta = power_cap * params.efficiency;
            break;
        default:  // P = 5
            params.efficiency = 1.0 / std::sqrt(3.0);
            delta = power_cap * params.efficiency;
            break;
    }
    params.energy_cap = delta * static_cast<double>(S - 1);
    return detail::assemble(rng, params, delta, T, 1);
}

}  // namespace storagedp::oracle
