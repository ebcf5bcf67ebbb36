#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

#include "storagedp/forecast.hpp"
#include "storagedp/synthetic.hpp"

using namespace storagedp;

namespace {

IngestResult ingest(const std::string& text) {
    std::istringstream in(text);
    return ingest_csv(in, "test.csv");
}

PriceRecord rec(unsigned month, unsigned hour, double da, double rt) {
    return {make_hour(2023, month, 1, hour), da, rt};
}

}  // namespace

TEST(Timestamps, ParseAndFormat) {
    EXPECT_EQ(parse_timestamp("2024-03-05 07:35"), make_hour(2024, 3, 5, 7));
    EXPECT_EQ(parse_timestamp("2024-03-05T07:00:00"), make_hour(2024, 3, 5, 7));
    EXPECT_EQ(parse_timestamp("2024-03-05"), make_hour(2024, 3, 5, 0));
    EXPECT_FALSE(parse_timestamp("yesterday"));
    EXPECT_FALSE(parse_timestamp("2024-13-01 00"));
    EXPECT_EQ(month_of(make_hour(2024, 3, 5, 7)), 3u);
    EXPECT_EQ(hour_of_day(make_hour(2024, 3, 5, 7)), 7u);
}

TEST(IngestCsv, FiveMinuteRowsAverageIntoOneHour) {
    std::string text = "timestamp,da,rt\n";
    for (int m = 0; m < 60; m += 5) text += "2024-01-01 03:" + std::string(m < 10 ? "0" : "") + std::to_string(m) + ",30,10\n";
    const auto r = ingest(text);
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0].rt, 10.0);
    EXPECT_EQ(r.records[0].da, 30.0);
    EXPECT_TRUE(r.gaps.empty());
}

TEST(IngestCsv, MeanOfTwoRows) {
    const auto r = ingest("timestamp,da,rt\n2024-01-01 03:00,30,0\n2024-01-01 03:30,,20\n");
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0].rt, 10.0);
    EXPECT_EQ(r.records[0].da, 30.0);
}

TEST(IngestCsv, MissingHourIsReportedAsGap) {
    const auto r = ingest("timestamp,da,rt\n2024-01-01 00:00,1,2\n2024-01-01 02:00,1,2\n");
    EXPECT_EQ(r.records.size(), 2u);
    ASSERT_EQ(r.gaps.size(), 1u);
    EXPECT_EQ(r.gaps[0].first_missing, make_hour(2024, 1, 1, 1));
    EXPECT_EQ(r.gaps[0].hours, 1u);
}

TEST(IngestCsv, HourWithoutRealTimePriceIsExcluded) {
    const auto r = ingest("timestamp,da,rt\n2024-01-01 00:00,1,2\n2024-01-01 01:00,1,\n");
    EXPECT_EQ(r.records.size(), 1u);
    ASSERT_EQ(r.gaps.size(), 1u);
    EXPECT_EQ(r.gaps[0].reason, "no rt price");
}

TEST(IngestCsv, ColumnOrderAndCaseDoNotMatter) {
    const auto r = ingest("RT,Timestamp,extra,DA\n5,2024-06-01 12,x,3\n");
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0].da, 3.0);
    EXPECT_EQ(r.records[0].rt, 5.0);
}

TEST(IngestCsv, ErrorsNameTheProblem) {
    try {
        ingest("timestamp,da\n2024-01-01 00:00,1\n");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("missing column 'rt'"), std::string::npos);
    }
    try {
        ingest("timestamp,da,rt\n2024-01-01 00:00,1,2\n2024-01-01 01:00,abc,2\n");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("test.csv:3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(ingest(""), DataError);
    EXPECT_THROW(ingest("timestamp,da,rt\n"), DataError);
    EXPECT_THROW(ingest("timestamp,da,rt\nnot-a-time,1,2\n"), DataError);
}

TEST(FitSpreadQuantiles, GroupsAreSorted) {
    const auto single = fit_spread_quantiles({rec(1, 5, 10, 13)});
    EXPECT_EQ(single.lookup(1, 5), (std::vector<double>{3}));
    const auto two = fit_spread_quantiles({rec(2, 7, 10, 15), rec(2, 7, 10, 9)});
    EXPECT_EQ(two.lookup(2, 7), (std::vector<double>{-1, 5}));
}

TEST(FitSpreadQuantiles, FallbackHierarchy) {
    const auto m = fit_spread_quantiles({rec(1, 5, 10, 13), rec(2, 5, 10, 11), rec(3, 8, 0, 100)});
    // Month 4 hour 5 has no data: pooled over hour 5.
    EXPECT_EQ(m.lookup(4, 5), (std::vector<double>{1, 3}));
    // Hour 9 never seen: global pool.
    EXPECT_EQ(m.lookup(4, 9), (std::vector<double>{1, 3, 100}));
    EXPECT_THROW(SpreadQuantileModel{}.lookup(1, 1), ConfigError);
}

TEST(EmpiricalQuantile, LinearBetweenOrderStatistics) {
    const std::vector<double> v{0, 10};
    EXPECT_DOUBLE_EQ(empirical_quantile(v, 0.25), 2.5);
    EXPECT_DOUBLE_EQ(empirical_quantile(v, 0.75), 7.5);
    EXPECT_DOUBLE_EQ(empirical_quantile({1, 2, 9}, 0.5), 2.0);
    EXPECT_DOUBLE_EQ(empirical_quantile({4}, 0.9), 4.0);
}

TEST(GenerateScenarios, TwoSampleExample) {
    const auto m = fit_spread_quantiles({rec(1, 0, 0, 0), rec(1, 0, 0, 10)});
    const auto s = generate_scenarios(m, {rec(1, 0, 40, 0)}, 2);
    EXPECT_DOUBLE_EQ(s.prices(0, 0), 42.5);
    EXPECT_DOUBLE_EQ(s.prices(0, 1), 47.5);
    EXPECT_EQ(s.probs(0, 0), 0.5);
}

TEST(GenerateScenarios, SingleSampleIsMedian) {
    const auto m = fit_spread_quantiles({rec(1, 0, 0, -4), rec(1, 0, 0, 1), rec(1, 0, 0, 30)});
    EXPECT_DOUBLE_EQ(generate_scenarios(m, {rec(1, 0, 20, 0)}, 1).prices(0, 0), 21.0);
}

TEST(GenerateScenarios, ZeroSpreadsReproduceDayAhead) {
    std::vector<PriceRecord> train;
    for (unsigned h = 0; h < 24; ++h) train.push_back(rec(1, h, 30, 30));
    const auto m = fit_spread_quantiles(train);
    const auto s = generate_scenarios(m, train, 7);
    for (std::size_t t = 0; t < 24; ++t)
        for (std::size_t r = 0; r < 7; ++r) EXPECT_EQ(s.prices(t, r), 30.0);
}

TEST(GenerateScenarios, Errors) {
    const auto m = fit_spread_quantiles({rec(1, 0, 0, 1)});
    EXPECT_THROW(generate_scenarios(m, {rec(1, 0, 0, 0)}, 0), ConfigError);
    EXPECT_THROW(generate_scenarios(SpreadQuantileModel{}, {rec(1, 0, 0, 0)}, 3), ConfigError);
}

TEST(GenerateScenarios, PropertiesOnSyntheticYear) {
    const auto train = synthetic::market_records(1, make_hour(2023, 1, 1, 0), 24 * 365);
    const auto test = synthetic::market_records(2, make_hour(2024, 1, 1, 0), 24 * 14);
    const auto s = generate_scenarios(fit_spread_quantiles(train), test, 200);
    for (std::size_t t = 0; t < s.horizon(); ++t) {
        const auto row = s.prices.row(t);
        EXPECT_TRUE(std::is_sorted(row.begin(), row.end()));
        double psum = 0;
        for (double p : s.probs.row(t)) psum += p;
        EXPECT_EQ(psum, 1.0);
    }
}

TEST(GenerateScenarios, ProbabilityRowsSumToOneForAnySampleCount) {
    SpreadQuantileModel m = fit_spread_quantiles({rec(1, 0, 10, 12), rec(1, 0, 10, 7)});
    for (std::size_t R = 1; R <= 300; ++R) {
        const auto s = generate_scenarios(m, {rec(1, 0, 0, 0)}, R);
        double psum = 0;
        for (double p : s.probs.row(0)) psum += p;
        EXPECT_EQ(psum, 1.0) << "R=" << R;
    }
}

TEST(GenerateScenarios, SampleMeanConvergesOnLargeGroups) {
    // Interpolated quantiles give the extreme order statistics half weight, so
    // the large-R mean differs from the group mean by O(range / group size).
    // Large skewed groups keep that below the tolerance.
    std::mt19937_64 rng(12);
    std::lognormal_distribution<double> skew(1.0, 0.8);
    std::vector<PriceRecord> train;
    for (unsigned h = 0; h < 4; ++h)
        for (int k = 0; k < 2000; ++k) train.push_back(rec(5, h, 0.0, skew(rng) - 2.0));
    const auto model = fit_spread_quantiles(train);
    std::vector<PriceRecord> da;
    for (unsigned h = 0; h < 4; ++h) da.push_back(rec(5, h, 35.0 + h, 0.0));
    const auto s = generate_scenarios(model, da, 1000);
    for (std::size_t t = 0; t < 4; ++t) {
        const auto& group = model.lookup(5, static_cast<unsigned>(t));
        const double target =
            da[t].da + std::accumulate(group.begin(), group.end(), 0.0) / static_cast<double>(group.size());
        const auto row = s.prices.row(t);
        const double mean = std::accumulate(row.begin(), row.end(), 0.0) / 1000.0;
        EXPECT_NEAR(mean, target, 0.01 * std::abs(target)) << "stage " << t;
    }
}

TEST(ScenarioCsv, RoundTrip) {
    const auto s = synthetic::random_scenarios(4, 5, 3);
    std::stringstream io;
    write_scenarios_csv(io, s);
    const auto back = read_scenarios_csv(io);
    EXPECT_EQ(back.prices, s.prices);
    EXPECT_EQ(back.probs, s.probs);
}

TEST(ScenarioCsv, RejectsBadHeaderAndMissingCells) {
    std::istringstream bad("t,r,p,q\n0,0,1,1\n");
    EXPECT_THROW(read_scenarios_csv(bad), DataError);
    std::istringstream hole("stage,sample,price,prob\n0,0,1,0.5\n1,1,1,0.5\n");
    EXPECT_THROW(read_scenarios_csv(hole), DataError);
}
