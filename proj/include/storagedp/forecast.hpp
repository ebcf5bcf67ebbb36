#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "storagedp/dp.hpp"
#include "storagedp/errors.hpp"

namespace storagedp {

using HourStamp = std::chrono::sys_time<std::chrono::hours>;

/// One hour of day-ahead and (hour-averaged) real-time prices.
struct PriceRecord {
    HourStamp hour;
    Price da;
    Price rt;
};

inline unsigned month_of(HourStamp h) {
    const std::chrono::year_month_day ymd{std::chrono::floor<std::chrono::days>(h)};
    return static_cast<unsigned>(ymd.month());
}

inline unsigned hour_of_day(HourStamp h) {
    const auto since_midnight = h - std::chrono::floor<std::chrono::days>(h);
    return static_cast<unsigned>(since_midnight.count());
}

inline HourStamp make_hour(int y, unsigned m, unsigned d, unsigned hour) {
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    return std::chrono::sys_days{ymd} + std::chrono::hours{hour};
}

inline std::string format_hour(HourStamp h) {
    const auto day = std::chrono::floor<std::chrono::days>(h);
    const std::chrono::year_month_day ymd{day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02u:00", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hour_of_day(h));
    return buf;
}

/// Parses "YYYY-MM-DD HH:MM[:SS]" (or with a 'T' separator) as local-naive
/// time and truncates it to the hour. Timezones are the caller's business.
inline std::optional<HourStamp> parse_timestamp(const std::string& text) {
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0;
    char sep = 0;
    double sec = 0.0;
    const int n = std::sscanf(text.c_str(), "%d-%u-%u%c%u:%u:%lf", &y, &mo, &d, &sep, &h, &mi, &sec);
    if (n < 3) return std::nullopt;
    if (n == 3) h = 0;
    else if (n < 5 || (sep != ' ' && sep != 'T')) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
    if (!ymd.ok() || h > 23 || mi > 59) return std::nullopt;
    return std::chrono::sys_days{ymd} + std::chrono::hours{h};
}

struct DataGap {
    HourStamp first_missing;
    std::size_t hours;
    std::string reason;
};

struct IngestResult {
    std::vector<PriceRecord> records;  // strictly increasing hours
    std::vector<DataGap> gaps;
};

namespace detail {

inline std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c) && c != '"'; };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

// Blank lines and '#' comment lines carry no data.
inline bool skippable(const std::string& line) {
    const auto t = trim(line);
    return t.empty() || t.front() == '#';
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::optional<double> parse_price(const std::string& cell) {
    if (cell.empty()) return std::nullopt;
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception&) {
        throw DataError("not a number: '" + cell + "'");
    }
    if (used != cell.size() || !std::isfinite(v)) throw DataError("not a finite number: '" + cell + "'");
    return v;
}

struct HourAccumulator {
    double da_sum = 0.0, rt_sum = 0.0;
    std::size_t da_n = 0, rt_n = 0;
};

}  // namespace detail

/// Reads a "timestamp,da,rt" CSV (columns in any order, extra columns
/// ignored). Sub-hourly rows are averaged into their hour; an empty da or rt
/// cell means "not observed in this row", so an hourly DA price can be given
/// once per hour next to five-minute RT rows. Hours lacking either price and
/// holes in the hourly sequence are reported as gaps and left out.
inline IngestResult ingest_csv(std::istream& in, const std::string& source = "<input>") {
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::skippable(line)) continue;
        header = detail::split_csv(line);
        break;
    }
    if (header.empty()) throw DataError(source + ": empty file");

    auto column = [&](const char* name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (detail::lower(header[i]) == name) return i;
        throw DataError(source + ": missing column '" + name + "'");
    };
    const std::size_t c_ts = column("timestamp"), c_da = column("da"), c_rt = column("rt");
    const std::size_t needed = std::max({c_ts, c_da, c_rt}) + 1;

    std::map<HourStamp, detail::HourAccumulator> hours;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::skippable(line)) continue;
        const auto cells = detail::split_csv(line);
        const std::string where = source + ":" + std::to_string(lineno) + ": ";
        if (cells.size() < needed) throw DataError(where + "expected at least " + std::to_string(needed) + " columns");
        const auto ts = parse_timestamp(cells[c_ts]);
        if (!ts) throw DataError(where + "bad timestamp '" + cells[c_ts] + "'");
        std::optional<double> da, rt;
        try {
            da = detail::parse_price(cells[c_da]);
            rt = detail::parse_price(cells[c_rt]);
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        }
        auto& acc = hours[*ts];
        if (da) acc.da_sum += *da, ++acc.da_n;
        if (rt) acc.rt_sum += *rt, ++acc.rt_n;
        ++rows;
    }
    if (rows == 0) throw DataError(source + ": no data rows");

    IngestResult result;
    std::optional<HourStamp> prev;
    for (const auto& [hour, acc] : hours) {
        if (prev && hour - *prev > std::chrono::hours{1}) {
            const auto missing = static_cast<std::size_t>((hour - *prev).count() - 1);
            result.gaps.push_back({*prev + std::chrono::hours{1}, missing, "no rows"});
        }
        prev = hour;
        if (acc.da_n == 0 || acc.rt_n == 0) {
            result.gaps.push_back({hour, 1, acc.da_n == 0 ? "no da price" : "no rt price"});
            continue;
        }
        result.records.push_back({hour, acc.da_sum / static_cast<double>(acc.da_n),
                                  acc.rt_sum / static_cast<double>(acc.rt_n)});
    }
    return result;
}

/// Empirical RT-minus-DA spread distributions keyed by (month, hour of day),
/// with hour-pooled and globally pooled fallbacks.
struct SpreadQuantileModel {
    std::map<std::pair<unsigned, unsigned>, std::vector<double>> groups;  // sorted ascending
    std::array<std::vector<double>, 24> by_hour;                          // sorted ascending
    std::vector<double> pooled;                                           // sorted ascending

    bool empty() const noexcept { return pooled.empty(); }

    /// The most specific non-empty group for (month, hour).
    const std::vector<double>& lookup(unsigned month, unsigned hour) const {
        if (auto it = groups.find({month, hour}); it != groups.end() && !it->second.empty())
            return it->second;
        if (hour < 24 && !by_hour[hour].empty()) return by_hour[hour];
        if (pooled.empty()) throw ConfigError("spread model is empty");
        return pooled;
    }
};

inline SpreadQuantileModel fit_spread_quantiles(const std::vector<PriceRecord>& train) {
    SpreadQuantileModel m;
    for (const auto& r : train) {
        const double spread = r.rt - r.da;
        const unsigned h = hour_of_day(r.hour);
        m.groups[{month_of(r.hour), h}].push_back(spread);
        m.by_hour[h].push_back(spread);
        m.pooled.push_back(spread);
    }
    for (auto& [key, v] : m.groups) std::sort(v.begin(), v.end());
    for (auto& v : m.by_hour) std::sort(v.begin(), v.end());
    std::sort(m.pooled.begin(), m.pooled.end());
    return m;
}

/// Quantile of a sorted sample with linear interpolation between order
/// statistics at position q*(n-1).
inline double empirical_quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw ConfigError("quantile of an empty sample");
    const double h = std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= sorted.size() || frac == 0.0) return sorted[lo];
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

/// Price scenarios for each hour of `da_series`: da_t plus the spread
/// quantiles at levels (r + 0.5)/R, each with probability 1/R.
inline ScenarioSet generate_scenarios(const SpreadQuantileModel& model, const std::vector<PriceRecord>& da_series,
                                      std::size_t samples) {
    if (samples < 1) throw ConfigError("sample count must be at least 1");
    if (model.empty()) throw ConfigError("spread model is empty");
    if (da_series.empty()) throw ConfigError("day-ahead series is empty");
    const std::size_t T = da_series.size();
    ScenarioSet set{Matrix<double>(T, samples), Matrix<double>(T, samples, 1.0 / static_cast<double>(samples))};
    // Last weight takes the rounding remainder so each row sums to exactly 1
    // when added left to right.
    double head = 0.0;
    for (std::size_t r = 0; r + 1 < samples; ++r) head += set.probs(0, r);
    for (std::size_t t = 0; t < T; ++t) set.probs(t, samples - 1) = 1.0 - head;
    for (std::size_t t = 0; t < T; ++t) {
        const auto& group = model.lookup(month_of(da_series[t].hour), hour_of_day(da_series[t].hour));
        for (std::size_t r = 0; r < samples; ++r) {
            const double q = (static_cast<double>(r) + 0.5) / static_cast<double>(samples);
            set.prices(t, r) = da_series[t].da + empirical_quantile(group, q);
        }
    }
    return set;
}

// Scenario files: "stage,sample,price,prob", one row per (stage, sample).

inline void write_scenarios_csv(std::ostream& os, const ScenarioSet& set) {
    os << "stage,sample,price,prob\n";
    char buf[96];
    for (std::size_t t = 0; t < set.horizon(); ++t)
        for (std::size_t r = 0; r < set.samples(); ++r) {
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", t, r, set.prices(t, r), set.probs(t, r));
            os << buf;
        }
}

inline ScenarioSet read_scenarios_csv(std::istream& in, const std::string& source = "<scenarios>") {
    std::string line;
    std::size_t lineno = 0;
    struct Row {
        std::size_t t, r;
        double price, prob;
    };
    std::vector<Row> rows;
    bool header = false;
    std::size_t T = 0, R = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::skippable(line)) continue;
        if (!header) {
            const auto cols = detail::split_csv(line);
            if (cols.size() < 4 || detail::lower(cols[0]) != "stage" || detail::lower(cols[1]) != "sample" ||
                detail::lower(cols[2]) != "price" || detail::lower(cols[3]) != "prob")
                throw DataError(source + ":" + std::to_string(lineno) + ": expected header stage,sample,price,prob");
            header = true;
            continue;
        }
        const auto cells = detail::split_csv(line);
        Row row{};
        try {
            if (cells.size() < 4) throw DataError("expected 4 columns");
            row.t = std::stoul(cells[0]);
            row.r = std::stoul(cells[1]);
            const auto price = detail::parse_price(cells[2]);
            const auto prob = detail::parse_price(cells[3]);
            if (!price || !prob) throw DataError("empty price or probability");
            row.price = *price;
            row.prob = *prob;
        } catch (const std::exception& e) {
            throw DataError(source + ":" + std::to_string(lineno) + ": " + e.what());
        }
        T = std::max(T, row.t + 1);
        R = std::max(R, row.r + 1);
        rows.push_back(row);
    }
    if (rows.empty()) throw DataError(source + ": no scenario rows");
    if (rows.size() != T * R) throw DataError(source + ": scenario table is not a full stage x sample grid");
    ScenarioSet set{Matrix<double>(T, R, std::nan("")), Matrix<double>(T, R, std::nan(""))};
    for (const auto& row : rows) {
        if (!std::isnan(set.prices(row.t, row.r)))
            throw DataError(source + ": duplicate entry for stage " + std::to_string(row.t));
        set.prices(row.t, row.r) = row.price;
        set.probs(row.t, row.r) = row.prob;
    }
    set.validate();
    return set;
}

}  // namespace storagedp
