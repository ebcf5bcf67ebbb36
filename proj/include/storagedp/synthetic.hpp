#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "storagedp/forecast.hpp"

namespace storagedp::synthetic {

/// Daily sinusoid plus Gaussian noise, in $/MWh.
inline std::vector<double> sinusoid_prices(std::uint64_t seed, std::size_t hours, double mean = 40.0,
                                           double amplitude = 20.0, double noise = 8.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> eps(0.0, noise);
    std::vector<double> out(hours);
    for (std::size_t h = 0; h < hours; ++h)
        out[h] = mean + amplitude * std::sin(2.0 * std::numbers::pi * (static_cast<double>(h % 24) - 9.0) / 24.0) +
                 eps(rng);
    return out;
}

struct MarketShape {
    double da_mean = 40.0;
    double da_daily_amplitude = 15.0;
    double da_evening_amplitude = 8.0;
    double da_day_level_sd = 6.0;
    double da_noise_sd = 2.0;
    double spread_persistence = 0.5;  // AR(1) coefficient of the RT - DA spread
    double spread_sd = 6.0;
    double spike_probability = 0.03;
    double spike_scale = 60.0;
};

/// Hourly DA/RT pairs. DA follows a daily shape with a random day level; RT
/// adds an autocorrelated spread with occasional upward spikes, so the last
/// realized RT price carries information about the next one.
inline std::vector<PriceRecord> market_records(std::uint64_t seed, HourStamp start, std::size_t hours,
                                               const MarketShape& shape = {}) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<PriceRecord> out;
    out.reserve(hours);
    double day_level = 0.0;
    double spread = 0.0;
    for (std::size_t k = 0; k < hours; ++k) {
        const HourStamp hour = start + std::chrono::hours{static_cast<long>(k)};
        const double h = hour_of_day(hour);
        if (k == 0 || h == 0.0) day_level = shape.da_day_level_sd * unit(rng);
        const double da = shape.da_mean + day_level +
                          shape.da_daily_amplitude * std::sin(2.0 * std::numbers::pi * (h - 9.0) / 24.0) +
                          shape.da_evening_amplitude * std::exp(-0.5 * std::pow((h - 18.0) / 2.0, 2.0)) +
                          shape.da_noise_sd * unit(rng);
        spread = shape.spread_persistence * spread + shape.spread_sd * unit(rng);
        if (uniform(rng) < shape.spike_probability) spread += shape.spike_scale * uniform(rng);
        out.push_back({hour, da, da + spread});
    }
    return out;
}

inline std::vector<double> da_of(const std::vector<PriceRecord>& records) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.da);
    return out;
}

inline std::vector<double> rt_of(const std::vector<PriceRecord>& records) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.rt);
    return out;
}

/// Random scenario set with R samples per stage around a sinusoid, uniform
/// probabilities. Used for timing runs where only the shapes matter.
inline ScenarioSet random_scenarios(std::uint64_t seed, std::size_t hours, std::size_t samples) {
    const auto base = sinusoid_prices(seed, hours);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> spread(0.0, 10.0);
    ScenarioSet set{Matrix<double>(hours, samples), Matrix<double>(hours, samples, 1.0 / static_cast<double>(samples))};
    for (std::size_t t = 0; t < hours; ++t)
        for (std::size_t r = 0; r < samples; ++r) set.prices(t, r) = base[t] + spread(rng);
    return set;
}

}  // namespace storagedp::synthetic
