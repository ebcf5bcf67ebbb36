#pragma once

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "storagedp/dp.hpp"
#include "storagedp/errors.hpp"
#include "storagedp/model.hpp"

namespace storagedp {

/// Hull vertices closer than this in quantity are treated as one vertex.
inline constexpr double kQuantityMergeTol = 1e-12;

struct ProfilePoint {
    Megawatts p;
    double u;  // continuation value V_{t+1}(s + F(p))

    friend bool operator==(const ProfilePoint&, const ProfilePoint&) = default;
};

/// Continuation value of every feasible discrete action at one incoming state.
struct ActionValueProfile {
    std::vector<ProfilePoint> points;
};

struct BidSegment {
    Megawatts q_from;
    Megawatts q_to;
    Price price;
};

/// Monotone price-quantity offer for one delivery interval and incoming state.
struct BidCurve {
    std::vector<ProfilePoint> vertices;  // strictly ascending quantity
    std::vector<BidSegment> segments;    // price non-decreasing in quantity
    MegawattHours incoming_state = 0.0;
    std::size_t stage = 0;

    Megawatts min_quantity() const { return vertices.front().p; }
    Megawatts max_quantity() const { return vertices.back().p; }
};

inline StorageParams params_of(const Grid& grid, MegawattHours initial_soc = 0.0) {
    return {grid.power_cap, grid.energy_cap, grid.efficiency, initial_soc, 1};
}

/// U_t(p; s) for every candidate action at s (feasible grid actions plus the
/// interval ends). The bid for interval t looks ahead to V_{t+1}. Off-grid
/// states interpolate V_{t+1} at the exact next state.
inline ActionValueProfile action_values(const ValueTable& table, std::size_t t, MegawattHours s) {
    if (t >= table.horizon())
        throw DomainError("bid stage " + std::to_string(t) + " outside [0, " +
                          std::to_string(table.horizon()) + ")");
    const Grid& g = table.grid;
    ActionValueProfile profile;
    for (Megawatts p : candidate_actions(g, s, params_of(g))) {
        const double next = std::clamp(s + transition(p, g.efficiency), 0.0, g.energy_cap);
        profile.points.push_back({p, value_at(table, t + 1, next)});
    }
    return profile;
}

/// Upper concave envelope of the profile (monotone chain). Collinear
/// interior points are dropped; every vertex is one of the input points.
inline ActionValueProfile convexify_hypograph(const ActionValueProfile& profile) {
    if (profile.points.empty()) throw ConfigError("cannot convexify an empty profile");
    std::vector<ProfilePoint> pts = profile.points;
    std::sort(pts.begin(), pts.end(), [](const ProfilePoint& a, const ProfilePoint& b) {
        return a.p < b.p || (a.p == b.p && a.u > b.u);
    });

    // Merge near-duplicate quantities, keeping the larger value.
    std::vector<ProfilePoint> merged;
    for (const auto& pt : pts) {
        if (!merged.empty() && pt.p - merged.back().p < kQuantityMergeTol) {
            if (pt.u > merged.back().u) merged.back().u = pt.u;
            continue;
        }
        merged.push_back(pt);
    }

    auto slope = [](const ProfilePoint& a, const ProfilePoint& b) { return (b.u - a.u) / (b.p - a.p); };
    std::vector<ProfilePoint> hull;
    for (const auto& pt : merged) {
        // Pop while the last vertex sits on or below the chord to pt. Comparing
        // the same slopes later used for prices keeps them strictly monotone.
        while (hull.size() >= 2 && slope(hull[hull.size() - 2], hull.back()) <= slope(hull.back(), pt))
            hull.pop_back();
        hull.push_back(pt);
    }
    return {std::move(hull)};
}

/// Segment prices are the negated hull slopes: price = -(u_to - u_from)/(q_to - q_from).
inline BidCurve build_bid_curve(const ActionValueProfile& hull, MegawattHours s, std::size_t t) {
    if (hull.points.empty()) throw ConfigError("bid curve needs at least one vertex");
    BidCurve curve;
    curve.incoming_state = s;
    curve.stage = t;
    for (const auto& v : hull.points) {
        if (!curve.vertices.empty()) {
            const double dq = v.p - curve.vertices.back().p;
            if (dq <= 0.0) throw ConfigError("bid curve vertices have duplicate or unsorted quantities");
            if (dq < kQuantityMergeTol) {
                curve.vertices.back().u = std::max(curve.vertices.back().u, v.u);
                continue;
            }
        }
        curve.vertices.push_back(v);
    }
    for (std::size_t k = 0; k + 1 < curve.vertices.size(); ++k) {
        const auto& a = curve.vertices[k];
        const auto& b = curve.vertices[k + 1];
        const double price = -(b.u - a.u) / (b.p - a.p);
        if (!curve.segments.empty() && price < curve.segments.back().price)
            throw ConfigError("bid curve input is not concave");
        curve.segments.push_back({a.p, b.p, price});
    }
    return curve;
}

/// Curve for interval t at incoming state s, straight from the value table.
inline BidCurve make_bid_curve(const ValueTable& table, std::size_t t, MegawattHours s) {
    return build_bid_curve(convexify_hypograph(action_values(table, t, s)), s, t);
}

/// Price-taker clearing: the largest vertex quantity whose incoming segment
/// price is <= lambda. A price exactly on a segment clears the larger quantity.
inline Megawatts clear_bid(const BidCurve& curve, Price lambda) {
    if (curve.vertices.empty()) throw ConfigError("cannot clear an empty bid curve");
    Megawatts q = curve.vertices.front().p;
    for (const auto& seg : curve.segments) {
        if (seg.price > lambda) break;
        q = seg.q_to;
    }
    return q;
}

// Serialization -------------------------------------------------------------

inline std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline void write_bid_csv_header(std::ostream& os) { os << "stage,s_in,q_from,q_to,price\n"; }

inline void write_bid_csv_rows(std::ostream& os, const BidCurve& curve) {
    for (const auto& seg : curve.segments)
        os << curve.stage << ',' << format_number(curve.incoming_state) << ',' << format_number(seg.q_from)
           << ',' << format_number(seg.q_to) << ',' << format_number(seg.price) << '\n';
}

inline nlohmann::json to_json(const BidCurve& curve) {
    nlohmann::json j;
    j["stage"] = curve.stage;
    j["s_in"] = curve.incoming_state;
    j["vertices"] = nlohmann::json::array();
    for (const auto& v : curve.vertices) j["vertices"].push_back({{"q", v.p}, {"u", v.u}});
    j["segments"] = nlohmann::json::array();
    for (const auto& s : curve.segments)
        j["segments"].push_back({{"q_from", s.q_from}, {"q_to", s.q_to}, {"price", s.price}});
    return j;
}

}  // namespace storagedp
