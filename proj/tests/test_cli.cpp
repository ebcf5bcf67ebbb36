#include <gtest/gtest.h>
#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kCli = STORAGEDP_CLI_PATH;
const std::string kSamples = STORAGEDP_SAMPLES_DIR;

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> data_lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);)
        if (!line.empty() && line[0] != '#') lines.push_back(line);
    return lines;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / ("storagedp_cli_" + std::string(info->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    CliResult run(const std::string& args) {
        const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
        const std::string cmd = kCli + " " + args + " --out " + (dir / "out").string() + " >" + out.string() +
                                " 2>" + err.string();
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
    }

    json read_json(const std::string& name) { return json::parse(slurp(dir / "out" / name)); }

    fs::path write(const std::string& name, const std::string& text) {
        const auto p = dir / name;
        std::ofstream(p) << text;
        return p;
    }

    fs::path dir;
    const std::string sample = kSamples + "/prices_sample.csv";
};

}  // namespace

TEST_F(Cli, ForecastWritesOneRowPerStageAndSample) {
    const auto r = run("forecast --train " + sample + " --eval " + sample + " --samples 3");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(data_lines(dir / "out" / "scenarios.csv").size(), 1u + 48 * 3);
    const auto j = read_json("forecast.json");
    EXPECT_EQ(j["groups"], 24);
    EXPECT_EQ(j["stages"], 48);
    EXPECT_EQ(j["config"]["samples"], 3);
}

TEST_F(Cli, ForecastMissingColumnIsDataError) {
    const auto bad = write("bad.csv", "timestamp,da\n2024-01-01 00:00,1\n");
    const auto r = run("forecast --train " + bad.string() + " --eval " + sample);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("missing column 'rt'"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingFileIsDataError) { EXPECT_EQ(run("forecast --train /nonexistent.csv").code, 2); }

TEST_F(Cli, SolveTwoStageExampleMatchesOracleValue) {
    const auto sc = write("sc.csv", "stage,sample,price,prob\n0,0,-1,1\n1,0,2,1\n");
    const auto r = run("solve --scenarios " + sc.string() + " --duration 1 --eta 1 --delta 0.5");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = read_json("solve.json");
    EXPECT_DOUBLE_EQ(j["value"].get<double>(), 3.0);
    EXPECT_EQ(j["sizes"]["S"], 3);
    EXPECT_EQ(j["sizes"]["P"], 5);
}

TEST_F(Cli, SolveZeroPricesIsZero) {
    const auto sc = write("sc.csv", "stage,sample,price,prob\n0,0,0,0.5\n0,1,0,0.5\n1,0,0,0.5\n1,1,0,0.5\n");
    ASSERT_EQ(run("solve --scenarios " + sc.string()).code, 0);
    EXPECT_EQ(read_json("solve.json")["value"].get<double>(), 0.0);
}

TEST_F(Cli, SolveIsDeterministicApartFromTiming) {
    const std::string args = "solve --seed 3 --samples 20 --hours 48 --train-hours 2000";
    ASSERT_EQ(run(args).code, 0);
    auto a = read_json("solve.json");
    ASSERT_EQ(run(args).code, 0);
    auto b = read_json("solve.json");
    a.erase("timing");
    b.erase("timing");
    EXPECT_EQ(a, b);
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
    const auto ini = write("run.ini", "delta = 0.5\nduration = 2\nsamples = 4\nseed = 9\n");
    const auto r = run("solve --config " + ini.string() + " --delta 0.25 --hours 24 --train-hours 1000");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = read_json("solve.json");
    EXPECT_EQ(j["config"]["delta"], 0.25);
    EXPECT_EQ(j["config"]["duration"], 2.0);
    EXPECT_EQ(j["config"]["seed"], 9);
    EXPECT_EQ(j["sizes"]["S"], 9);
}

TEST_F(Cli, SampleConfigRuns) {
    const auto r = run("solve --config " + kSamples + "/storagedp.ini --train " + sample + " --eval " + sample);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_json("solve.json")["config"]["samples"], 50);
}

TEST_F(Cli, ValidationErrorsExitOne) {
    EXPECT_EQ(run("solve --eta 0.9 --roundtrip 0.8").code, 1);
    EXPECT_EQ(run("solve --delta 0.3 --hours 4 --train-hours 100").code, 1);
    EXPECT_EQ(run("solve --soc0 99 --hours 4 --train-hours 100").code, 1);
    EXPECT_EQ(run("solve --backend gpu").code, 1);
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("simulate --strategy psychic").code, 1);
}

TEST_F(Cli, PerfectForesightOnConstantPricesEarnsNothing) {
    std::string text = "timestamp,da,rt\n";
    for (int h = 0; h < 24; ++h) text += "2024-02-01 " + std::to_string(h) + ":00,30,30\n";
    const auto flat = write("flat.csv", text);
    const auto r = run("simulate --strategy perfect --train " + flat.string() + " --eval " + flat.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_json("simulation.json")["strategies"][0]["profit"].get<double>(), 0.0);
}

TEST_F(Cli, BidReplayTracksDeterministicValue) {
    const std::string common = " --realized --eval " + sample + " --train " + sample;
    ASSERT_EQ(run("solve" + common).code, 0);
    const double value = read_json("solve.json")["objective"];
    const auto r = run("simulate --strategy bids --bid-csv" + common);
    ASSERT_EQ(r.code, 0) << r.err;
    const double profit = read_json("simulation.json")["strategies"][0]["profit"];
    EXPECT_NEAR(profit, value, 0.005 * value);
    EXPECT_GT(data_lines(dir / "out" / "bids.csv").size(), 48u);
}

TEST_F(Cli, SimulateAllStrategies) {
    const auto r = run("simulate --samples 20 --hours 48 --train-hours 2000");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = read_json("simulation.json");
    ASSERT_EQ(j["strategies"].size(), 4u);
    for (const auto& s : j["strategies"]) {
        EXPECT_EQ(s["violations"], 0);
        EXPECT_EQ(s["simultaneous_charge_discharge"], 0);
    }
    EXPECT_EQ(j["lag_prior"]["source"], "da");
    EXPECT_EQ(data_lines(dir / "out" / "simulation.csv").size(), 1u + 4 * 48);
}

TEST_F(Cli, BenchReportsTableSizes) {
    auto r = run("bench --durations 4 --deltas 0.1 --bench-hours 3 --samples 5");
    ASSERT_EQ(r.code, 0) << r.err;
    auto lines = data_lines(dir / "out" / "bench.csv");
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[1].substr(0, 13), "4,0.1,41,22,3");
    r = run("bench --durations 100 --deltas 0.01 --bench-hours 1 --samples 2 --skip-reference");
    ASSERT_EQ(r.code, 0) << r.err;
    lines = data_lines(dir / "out" / "bench.csv");
    EXPECT_EQ(lines[1].substr(0, 18), "100,0.01,10001,203");
}

TEST_F(Cli, BenchBackendsAgree) {
    ASSERT_EQ(run("bench --durations 4,20 --deltas 0.1 --bench-hours 6 --samples 10").code, 0);
    const auto lines = data_lines(dir / "out" / "bench.csv");
    ASSERT_EQ(lines.size(), 3u);
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const double diff = std::stod(lines[k].substr(lines[k].rfind(',') + 1));
        EXPECT_LE(diff, 1e-9);
    }
}

TEST_F(Cli, PlotDataHasOneRowPerStrategyAndDuration) {
    const auto r = run("plot-data --durations 2,4 --samples 10 --hours 24 --train-hours 1000");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto lines = data_lines(dir / "out" / "plot_data.csv");
    ASSERT_EQ(lines.size(), 1u + 2 * 4);
    EXPECT_EQ(lines[1].substr(0, 10), "2,perfect,");
    EXPECT_EQ(lines[1].substr(lines[1].rfind(',') + 1), "1");
}

TEST_F(Cli, ExportLp) {
    ASSERT_EQ(run("export-lp --eval " + sample + " --hours 3").code, 0);
    const auto text = slurp(dir / "out" / "model.lp");
    EXPECT_NE(text.find("Binaries"), std::string::npos);
    EXPECT_NE(text.find("soc_3"), std::string::npos);
    ASSERT_EQ(run("export-lp --variant restricted --negative --eval " + sample + " --hours 3").code, 0);
    const auto restricted = slurp(dir / "out" / "model.lp");
    for (int t = 1; t <= 3; ++t)
        EXPECT_NE(restricted.find("\n p_d_" + std::to_string(t) + " = 0\n"), std::string::npos);
    EXPECT_EQ(run("export-lp --variant cubic").code, 1);
}

TEST_F(Cli, OracleCheckPassesAndCatchesMutant) {
    auto r = run("oracle-check");
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_NE(r.out.find("PASS"), std::string::npos);
    EXPECT_TRUE(read_json("oracle_check.json")["passed"].get<bool>());
    r = run("oracle-check --mutate");
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

TEST_F(Cli, OracleCheckRefusesOversizedInstances) {
    const auto r = run("oracle-check --det-max-T 12");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("refused"), std::string::npos) << r.err;
}
