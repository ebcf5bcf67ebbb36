// storagedp command-line tool: forecast, solve, simulate, bench, plot-data,
// export-lp and oracle-check on top of the header-only library.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "storagedp/storagedp.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace storagedp;

namespace {

struct RunConfig {
    double power_cap = 1.0;
    double duration = 4.0;
    std::optional<double> eta;
    std::optional<double> roundtrip;
    double soc0 = 0.0;
    double delta = 0.1;
    std::size_t samples = 200;
    std::string backend = "parallel";
    unsigned threads = 0;
    std::uint64_t seed = 1;
    std::string out = "out";

    std::string train;
    std::string eval;
    std::string scenarios;
    std::size_t hours = 0;
    std::size_t train_hours = 8760;

    double efficiency() const {
        if (eta) return *eta;
        const double rt = roundtrip.value_or(0.85);
        if (!(rt > 0.0 && rt <= 1.0)) throw ConfigError("roundtrip efficiency must be in (0, 1]");
        return std::sqrt(rt);
    }
    double energy_cap() const { return duration * power_cap; }

    StorageParams params(std::size_t horizon) const {
        if (!(duration > 0.0)) throw ConfigError("duration must be positive");
        StorageParams p{power_cap, energy_cap(), efficiency(), soc0, horizon};
        p.validate();
        return p;
    }
};

json to_json(const RunConfig& c) {
    json j{{"power_cap", c.power_cap}, {"duration", c.duration},     {"energy_cap", c.energy_cap()},
           {"efficiency", c.efficiency()}, {"soc0", c.soc0},         {"delta", c.delta},
           {"samples", c.samples},     {"backend", c.backend},       {"threads", c.threads},
           {"seed", c.seed},           {"hours", c.hours}};
    if (c.roundtrip) j["roundtrip"] = *c.roundtrip;
    j["train"] = c.train.empty() ? "synthetic" : c.train;
    j["eval"] = c.eval.empty() ? "synthetic" : c.eval;
    if (!c.scenarios.empty()) j["scenarios"] = c.scenarios;
    return j;
}

/// One-line "# key=value ..." header echoing the effective config into CSV outputs.
std::string config_comment(const std::string& command, const RunConfig& c) {
    std::ostringstream os;
    os << "# storagedp " << command;
    const json j = to_json(c);
    for (const auto& [k, v] : j.items()) os << ' ' << k << '=' << (v.is_string() ? v.get<std::string>() : v.dump());
    os << '\n';
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path output_path(const RunConfig& c, const std::string& name) {
    fs::create_directories(c.out);
    return fs::path(c.out) / name;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path.string());
    return os;
}

void write_json(const fs::path& path, const json& j) {
    auto os = open_output(path);
    os << j.dump(2) << '\n';
}

// Data ------------------------------------------------------------------------

struct MarketData {
    std::vector<PriceRecord> train;
    std::vector<PriceRecord> eval;
    std::vector<DataGap> gaps;
};

std::vector<PriceRecord> load_records(const std::string& path, std::vector<DataGap>& gaps) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    auto res = ingest_csv(in, path);
    for (const auto& g : res.gaps)
        std::cerr << "warning: " << path << ": " << g.hours << " hour(s) from " << format_hour(g.first_missing)
                  << " skipped (" << g.reason << ")\n";
    gaps.insert(gaps.end(), res.gaps.begin(), res.gaps.end());
    if (res.records.empty()) throw DataError(path + ": no complete hours");
    return res.records;
}

MarketData load_market(const RunConfig& c) {
    MarketData d;
    d.train = c.train.empty()
                  ? synthetic::market_records(c.seed, make_hour(2023, 1, 1, 0), c.train_hours)
                  : load_records(c.train, d.gaps);
    if (c.eval.empty()) {
        d.eval = synthetic::market_records(c.seed + 1, make_hour(2024, 1, 1, 0), c.hours ? c.hours : 168);
    } else {
        d.eval = load_records(c.eval, d.gaps);
        if (c.hours && c.hours < d.eval.size()) d.eval.resize(c.hours);
    }
    return d;
}

json gaps_json(const std::vector<DataGap>& gaps) {
    json j = json::array();
    for (const auto& g : gaps) j.push_back({{"from", format_hour(g.first_missing)}, {"hours", g.hours}, {"reason", g.reason}});
    return j;
}

ScenarioSet read_scenarios_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return read_scenarios_csv(in, path);
}

/// Scenario set for the evaluation horizon: a scenario file if given, the
/// realized RT prices as a single sample if asked, otherwise the quantile
/// forecast of the training spreads on top of the evaluation DA prices.
ScenarioSet scenarios_for(const RunConfig& c, const MarketData& d, bool realized) {
    if (!c.scenarios.empty()) return read_scenarios_file(c.scenarios);
    if (realized) return ScenarioSet::deterministic(synthetic::rt_of(d.eval));
    return generate_scenarios(fit_spread_quantiles(d.train), d.eval, c.samples);
}

// Commands ---------------------------------------------------------------------

int cmd_forecast(const RunConfig& c) {
    const auto data = load_market(c);
    const auto model = fit_spread_quantiles(data.train);
    const auto set = generate_scenarios(model, data.eval, c.samples);
    const auto csv = output_path(c, "scenarios.csv");
    {
        auto os = open_output(csv);
        os << config_comment("forecast", c);
        write_scenarios_csv(os, set);
    }
    json j{{"command", "forecast"},
           {"config", to_json(c)},
           {"stages", set.horizon()},
           {"samples", set.samples()},
           {"train_hours", data.train.size()},
           {"groups", model.groups.size()},
           {"gaps", gaps_json(data.gaps)},
           {"scenarios_csv", csv.string()}};
    write_json(output_path(c, "forecast.json"), j);
    std::cout << "forecast: " << set.horizon() << " stages x " << set.samples() << " samples from "
              << model.groups.size() << " (month, hour) groups -> " << csv.string() << '\n';
    return 0;
}

int cmd_solve(const RunConfig& c, bool realized, bool dump_values) {
    ScenarioSet set;
    json gaps = json::array();
    if (c.scenarios.empty()) {
        const auto data = load_market(c);
        set = scenarios_for(c, data, realized);
        gaps = gaps_json(data.gaps);
    } else {
        set = read_scenarios_file(c.scenarios);
    }
    const auto params = c.params(set.horizon());
    const auto grid = make_grid(params, c.delta);
    const auto tables = build_transition_tables(grid);
    const auto backend = make_backend(c.backend, c.threads);

    const auto t0 = std::chrono::steady_clock::now();
    const auto table = backward_induction(grid, tables, set, *backend);
    const double elapsed = seconds_since(t0);
    const double v0 = value_at(table, 0, params.initial_soc);

    json j{{"command", "solve"},
           {"config", to_json(c)},
           {"value", v0},
           {"sizes", {{"T", set.horizon()}, {"S", grid.num_states()}, {"P", grid.num_actions()}, {"R", set.samples()}}},
           {"backend", std::string(backend->name())},
           {"threads", backend->threads()},
           {"gaps", gaps},
           {"timing", {{"solve_seconds", elapsed}}}};
    // With a single scenario the rolled-forward schedule has a realized objective;
    // V0 is only the interpolated table value and can differ from it off-grid.
    std::optional<double> objective;
    if (set.samples() == 1) {
        objective = solve_deterministic(set.prices.flat(), params, grid, *backend).objective;
        j["objective"] = *objective;
    }
    if (dump_values) {
        const auto path = output_path(c, "values.csv");
        auto os = open_output(path);
        os << config_comment("solve", c) << "stage,s,value\n";
        for (std::size_t t = 0; t < table.values.rows(); ++t)
            for (std::size_t i = 0; i < grid.num_states(); ++i)
                os << t << ',' << format_number(grid.states[i]) << ',' << format_number(table.values(t, i)) << '\n';
        j["values_csv"] = path.string();
    }
    write_json(output_path(c, "solve.json"), j);
    std::cout << "solve: V0(" << params.initial_soc << ") = " << format_number(v0) << "  [T=" << set.horizon()
              << " S=" << grid.num_states() << " P=" << grid.num_actions() << " R=" << set.samples() << ", "
              << backend->name() << ", " << elapsed << " s]\n";
    if (objective) std::cout << "solve: schedule objective " << format_number(*objective) << '\n';
    return 0;
}

struct SimulateOptions {
    std::string strategy = "all";
    bool realized = false;
    bool bid_csv = false;
    bool negative = false;
    std::string lag_prior = "da";
};

std::vector<Strategy> parse_strategies(const std::string& name) {
    if (name == "all")
        return {Strategy::PerfectForesight, Strategy::Bids, Strategy::SelfSchedule, Strategy::Myopic};
    for (auto s : {Strategy::PerfectForesight, Strategy::Bids, Strategy::SelfSchedule, Strategy::Myopic,
                   Strategy::DischargeRestricted})
        if (name == to_string(s)) return {s};
    throw ConfigError("unknown strategy '" + name + "'");
}

void shift_negative(MarketData& d) {
    auto rt = build_negative_price_series(synthetic::rt_of(d.eval));
    auto da = build_negative_price_series(synthetic::da_of(d.eval));
    for (std::size_t t = 0; t < d.eval.size(); ++t) {
        d.eval[t].rt = rt[t];
        d.eval[t].da = da[t];
    }
}

struct StrategyRun {
    std::vector<SimulationResult> results;
    double perfect_value = 0.0;
    double lag_prior = 0.0;
};

/// Runs the requested strategies on one asset. The value table is built once
/// and shared by the bidding strategies.
StrategyRun run_strategies(const std::vector<Strategy>& which, const RunConfig& c, const StorageParams& params,
                           const MarketData& data, const ScenarioSet& set, const SimulateOptions& opt,
                           const KernelSet& backend) {
    const auto rt = synthetic::rt_of(data.eval), da = synthetic::da_of(data.eval);
    const auto grid = make_grid(params, c.delta);
    std::optional<ValueTable> table;
    auto shared_table = [&]() -> const ValueTable& {
        if (!table) table = backward_induction(grid, build_transition_tables(grid), set, backend);
        return *table;
    };

    StrategyRun run;
    run.lag_prior = opt.lag_prior == "rt" ? rt.front() : da.front();
    const auto fine = make_grid(params, perfect_foresight_delta(params, c.delta));
    const auto perfect = perfect_foresight(rt, params, fine, backend);
    run.perfect_value = perfect.profit;
    for (auto s : which) {
        switch (s) {
            case Strategy::PerfectForesight: run.results.push_back(perfect); break;
            case Strategy::Bids: run.results.push_back(simulate_bidding(shared_table(), rt, params)); break;
            case Strategy::SelfSchedule:
                run.results.push_back(simulate_self_schedule(shared_table(), rt, lag_series(rt, run.lag_prior), params));
                break;
            case Strategy::Myopic: run.results.push_back(simulate_myopic(da, rt, params, grid, backend)); break;
            case Strategy::DischargeRestricted:
                run.results.push_back(simulate_discharge_restricted(rt, params, grid, backend));
                break;
        }
        const auto& res = run.results.back();
        if (!validate_schedule(res.dispatch, params).empty())
            throw InvariantError(std::string(to_string(s)) + " schedule violates the storage constraints");
    }
    if (opt.bid_csv) {
        const auto path = output_path(c, "bids.csv");
        auto os = open_output(path);
        os << config_comment("simulate", c);
        write_bid_csv_header(os);
        // Curves the bidding strategy actually submitted, rebuilt from its states.
        const auto bids = simulate_bidding(shared_table(), rt, params);
        double s = params.initial_soc;
        for (std::size_t t = 0; t < rt.size(); ++t) {
            write_bid_csv_rows(os, make_bid_curve(shared_table(), t, s));
            s = bids.dispatch.socs[t];
        }
    }
    return run;
}

int cmd_simulate(RunConfig c, const SimulateOptions& opt) {
    const auto which = parse_strategies(opt.strategy);
    if (opt.lag_prior != "da" && opt.lag_prior != "rt") throw ConfigError("lag prior must be 'da' or 'rt'");
    auto data = load_market(c);
    if (opt.negative) shift_negative(data);
    const auto set = scenarios_for(c, data, opt.realized);
    if (set.horizon() != data.eval.size())
        throw ConfigError("scenario horizon " + std::to_string(set.horizon()) + " does not match " +
                          std::to_string(data.eval.size()) + " evaluation hours");
    const auto params = c.params(data.eval.size());
    const auto backend = make_backend(c.backend, c.threads);
    const auto run = run_strategies(which, c, params, data, set, opt, *backend);

    const auto csv = output_path(c, "simulation.csv");
    {
        auto os = open_output(csv);
        os << config_comment("simulate", c) << "strategy,stage,timestamp,price,power,soc\n";
        for (const auto& res : run.results)
            for (const auto& st : res.per_stage)
                os << to_string(res.strategy) << ',' << st.stage << ',' << format_hour(data.eval[st.stage].hour) << ','
                   << format_number(st.realized) << ',' << format_number(st.power) << ',' << format_number(st.soc)
                   << '\n';
    }
    json summary = json::array();
    for (const auto& res : run.results) {
        summary.push_back({{"strategy", to_string(res.strategy)},
                           {"profit", res.profit},
                           {"capture_ratio", capture_ratio(res.profit, run.perfect_value)},
                           {"violations", validate_schedule(res.dispatch, params).size()},
                           {"simultaneous_charge_discharge", count_simultaneous_charge_discharge(res.dispatch)}});
        std::cout << to_string(res.strategy) << ": profit " << format_number(res.profit) << " (capture "
                  << format_number(capture_ratio(res.profit, run.perfect_value)) << ")\n";
    }
    json j{{"command", "simulate"},
           {"config", to_json(c)},
           {"strategies", summary},
           {"perfect_foresight_value", run.perfect_value},
           {"perfect_foresight_delta", perfect_foresight_delta(params, c.delta)},
           {"lag_prior", {{"source", opt.lag_prior}, {"value", run.lag_prior}}},
           {"scenario_source", !c.scenarios.empty() ? "file" : opt.realized ? "realized" : "forecast"},
           {"negative_shift", opt.negative},
           {"gaps", gaps_json(data.gaps)},
           {"simulation_csv", csv.string()}};
    write_json(output_path(c, "simulation.json"), j);
    return 0;
}

struct BenchOptions {
    std::vector<double> durations{4, 20, 100};
    std::vector<double> deltas{0.1};
    std::size_t hours = 24;
    bool skip_reference = false;
};

int cmd_bench(const RunConfig& c, const BenchOptions& opt) {
    const auto path = output_path(c, "bench.csv");
    auto os = open_output(path);
    os << config_comment("bench", c) << "duration,delta,S,P,T,R,reference_s,parallel_s,speedup,max_rel_diff\n";
    const auto set = synthetic::random_scenarios(c.seed, opt.hours, c.samples);
    const ReferenceKernels reference;
    const ParallelKernels parallel(c.threads);
    for (double duration : opt.durations) {
        for (double delta : opt.deltas) {
            RunConfig cell = c;
            cell.duration = duration;
            const auto params = cell.params(opt.hours);
            const auto grid = make_grid(params, delta);
            const auto tables = build_transition_tables(grid);

            auto t0 = std::chrono::steady_clock::now();
            const auto v_par = initial_values(grid, tables, set, parallel);
            const double par_s = seconds_since(t0);
            double ref_s = std::nan(""), diff = std::nan("");
            if (!opt.skip_reference) {
                t0 = std::chrono::steady_clock::now();
                const auto v_ref = initial_values(grid, tables, set, reference);
                ref_s = seconds_since(t0);
                diff = 0.0;
                for (std::size_t i = 0; i < v_ref.size(); ++i)
                    diff = std::max(diff, std::abs(v_ref[i] - v_par[i]) / std::max(1.0, std::abs(v_ref[i])));
            }
            os << format_number(duration) << ',' << format_number(delta) << ',' << grid.num_states() << ','
               << grid.num_actions() << ',' << opt.hours << ',' << c.samples << ',' << format_number(ref_s) << ','
               << format_number(par_s) << ',' << format_number(ref_s / par_s) << ',' << format_number(diff) << '\n';
            std::cout << "duration " << duration << " delta " << delta << ": S=" << grid.num_states()
                      << " P=" << grid.num_actions() << " reference " << ref_s << " s, parallel " << par_s << " s\n";
        }
    }
    return 0;
}

int cmd_plot_data(const RunConfig& c, const std::vector<double>& durations, const SimulateOptions& opt) {
    const auto data = load_market(c);
    const auto set = scenarios_for(c, data, opt.realized);
    const auto backend = make_backend(c.backend, c.threads);
    const auto path = output_path(c, "plot_data.csv");
    auto os = open_output(path);
    os << config_comment("plot-data", c) << "duration,strategy,profit,capture_ratio\n";
    const std::vector<Strategy> which{Strategy::PerfectForesight, Strategy::Bids, Strategy::SelfSchedule,
                                      Strategy::Myopic};
    for (double duration : durations) {
        RunConfig cell = c;
        cell.duration = duration;
        const auto params = cell.params(data.eval.size());
        const auto run = run_strategies(which, cell, params, data, set, {}, *backend);
        for (const auto& res : run.results)
            os << format_number(duration) << ',' << to_string(res.strategy) << ',' << format_number(res.profit)
               << ',' << format_number(capture_ratio(res.profit, run.perfect_value)) << '\n';
        std::cout << "duration " << duration << " h done\n";
    }
    return 0;
}

int cmd_export_lp(const RunConfig& c, const std::string& variant_name, bool negative) {
    const auto variant = oracle::parse_lp_variant(variant_name);
    auto data = load_market(c);
    if (negative) shift_negative(data);
    const auto prices = synthetic::rt_of(data.eval);
    const auto params = c.params(prices.size());
    const auto path = output_path(c, "model.lp");
    auto os = open_output(path);
    os << '\\' << config_comment("export-lp", c).substr(1);
    oracle::export_lp(os, prices, params, variant);
    std::cout << "export-lp: " << oracle::to_string(variant) << " model with " << prices.size() << " stages -> "
              << path.string() << '\n';
    return 0;
}

/// Reference kernels with the interpolation reading one grid point too high.
/// oracle-check --mutate runs on this to show the check can fail.
class OffByOneKernels final : public KernelSet {
public:
    std::string_view name() const noexcept override { return "mutant"; }
    unsigned threads() const noexcept override { return 1; }

    void gather_interpolate(std::span<const double> values, const TransitionTables& t,
                            Matrix<double>& out) const override {
        out.resize(t.z_low.rows(), t.z_low.cols());
        const auto top = static_cast<std::int32_t>(values.size()) - 1;
        for (std::size_t i = 0; i < out.rows(); ++i)
            for (std::size_t j = 0; j < out.cols(); ++j) {
                const auto lo = std::min(t.z_low(i, j) + 1, top), hi = std::min(t.z_high(i, j) + 1, top);
                const double w = t.interp_weight(i, j);
                out(i, j) = (1.0 - w) * values[lo] + w * values[hi];
            }
    }
    void mask_assign(Matrix<double>& m, const Matrix<std::uint8_t>& mask, double sentinel) const override {
        base_.mask_assign(m, mask, sentinel);
    }
    void outer_payoff(std::span<const double> a, std::span<const double> p, Matrix<double>& out) const override {
        base_.outer_payoff(a, p, out);
    }
    void broadcast_payoff_max(const Matrix<double>& next, const Matrix<double>& payoff, Matrix<double>& out,
                              Matrix<ActionIndex>* argmax) const override {
        base_.broadcast_payoff_max(next, payoff, out, argmax);
    }
    void expectation(const Matrix<double>& q, std::span<const double> probs, std::span<double> out) const override {
        base_.expectation(q, probs, out);
    }

private:
    ReferenceKernels base_;
};

struct OracleOptions {
    std::size_t count = 200;
    std::size_t det_count = 100;
    std::size_t max_T = 4, max_S = 5, max_R = 3;
    std::size_t det_max_T = 6;
    bool mutate = false;
};

int cmd_oracle_check(const RunConfig& c, const OracleOptions& opt) {
    const oracle::Limits limits;
    // Worst case is five grid actions plus the two interval ends per stage.
    if (std::pow(7.0, static_cast<double>(opt.det_max_T)) > limits.max_sequences)
        throw ConfigError("oracle-check refused: up to 7^" + std::to_string(opt.det_max_T) +
                          " action sequences exceeds the enumeration limit of " +
                          std::to_string(static_cast<long long>(limits.max_sequences)));
    if (opt.max_S > 64 || opt.max_T > 64) throw ConfigError("oracle-check refused: instance shape too large");

    std::unique_ptr<KernelSet> backend;
    if (opt.mutate)
        backend = std::make_unique<OffByOneKernels>();
    else
        backend = make_backend(c.backend, c.threads);

    oracle::RandomShape shape{opt.max_T, opt.max_S, opt.max_R};
    std::size_t stochastic_fail = 0, det_fail = 0;
    double worst = 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t k = 0; k < opt.count; ++k) {
        const auto inst = oracle::random_stochastic_instance(c.seed + k, shape);
        const auto table = backward_induction(inst.grid, build_transition_tables(inst.grid), inst.scenarios, *backend);
        const double gap = std::abs(value_at(table, 0, inst.params.initial_soc) - oracle::expectimax(inst));
        worst = std::max(worst, gap);
        if (!(gap <= 1e-9)) ++stochastic_fail;
    }
    for (std::size_t k = 0; k < opt.det_count; ++k) {
        const auto inst = oracle::random_recombining_instance(c.seed + k, opt.det_max_T);
        std::vector<double> prices(inst.horizon());
        for (std::size_t t = 0; t < prices.size(); ++t) prices[t] = inst.scenarios.prices(t, 0);
        const auto sol = solve_deterministic(prices, inst.params, inst.grid, *backend);
        const double gap = std::abs(sol.objective - oracle::exhaustive_deterministic(inst).objective);
        worst = std::max(worst, gap);
        if (!(gap <= 1e-9)) ++det_fail;
    }
    const bool ok = stochastic_fail == 0 && det_fail == 0;
    json j{{"command", "oracle-check"},
           {"config", to_json(c)},
           {"backend", std::string(backend->name())},
           {"stochastic", {{"instances", opt.count}, {"failures", stochastic_fail}}},
           {"deterministic", {{"instances", opt.det_count}, {"failures", det_fail}}},
           {"max_abs_gap", worst},
           {"passed", ok},
           {"timing", {{"seconds", seconds_since(t0)}}}};
    write_json(output_path(c, "oracle_check.json"), j);
    std::cout << (ok ? "PASS" : "FAIL") << " oracle-check [" << backend->name() << "]: stochastic "
              << opt.count - stochastic_fail << "/" << opt.count << ", deterministic " << opt.det_count - det_fail
              << "/" << opt.det_count << ", max gap " << worst << '\n';
    return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic dynamic programming for energy storage arbitrage"};
    app.fallthrough();
    app.require_subcommand(1);
    app.set_config("--config", "", "Keyed text file (key = value); command-line flags override it");

    RunConfig cfg;
    auto* eta = app.add_option("--eta", cfg.eta, "One-way efficiency (0, 1]");
    auto* rt = app.add_option("--roundtrip", cfg.roundtrip, "Round-trip efficiency; eta = sqrt(roundtrip) [0.85]");
    eta->excludes(rt);
    app.add_option("--power-cap", cfg.power_cap, "Power rating in MW")->capture_default_str();
    app.add_option("--duration", cfg.duration, "Energy-to-power ratio in hours")->capture_default_str();
    app.add_option("--soc0", cfg.soc0, "Initial state of charge in MWh")->capture_default_str();
    app.add_option("--delta", cfg.delta, "State grid step in MWh")->capture_default_str();
    app.add_option("--samples", cfg.samples, "Scenario samples per stage (R)")->capture_default_str();
    app.add_option("--backend", cfg.backend, "Kernel backend")
        ->check(CLI::IsMember({"reference", "parallel"}))
        ->capture_default_str();
    app.add_option("--threads", cfg.threads, "Worker threads for the parallel backend (0 = all)");
    app.add_option("--seed", cfg.seed, "Seed for synthetic data and random instances")->capture_default_str();
    app.add_option("--out", cfg.out, "Output directory")->capture_default_str();
    app.add_option("--train", cfg.train, "Training price CSV (timestamp,da,rt); synthetic if omitted");
    app.add_option("--eval", cfg.eval, "Evaluation price CSV (timestamp,da,rt); synthetic if omitted");
    app.add_option("--scenarios", cfg.scenarios, "Scenario CSV (stage,sample,price,prob) to use instead of a forecast");
    app.add_option("--hours", cfg.hours, "Evaluation horizon in hours (0 = whole file, synthetic default 168)");
    app.add_option("--train-hours", cfg.train_hours, "Length of the synthetic training series")->capture_default_str();

    auto* forecast = app.add_subcommand("forecast", "Quantile price scenarios from DA/RT history");

    bool realized = false, dump_values = false;
    auto* solve = app.add_subcommand("solve", "Backward induction; reports V0 at the initial state");
    solve->add_flag("--realized", realized, "Use realized RT prices as a single scenario");
    solve->add_flag("--dump-values", dump_values, "Write the full value table to values.csv");

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate dispatch strategies against realized prices");
    simulate->add_option("--strategy", sim.strategy, "perfect|bids|self|myopic|restricted|all")
        ->check(CLI::IsMember({"perfect", "bids", "self", "myopic", "restricted", "all"}))
        ->capture_default_str();
    simulate->add_flag("--realized", sim.realized, "Build the value table from the realized prices (R = 1)");
    simulate->add_flag("--bid-csv", sim.bid_csv, "Write the submitted bid curves to bids.csv");
    simulate->add_flag("--negative", sim.negative, "Shift evaluation prices so that their maximum is 0");
    simulate->add_option("--lag-prior", sim.lag_prior, "Proxy price for the first self-scheduled hour: da|rt")
        ->capture_default_str();

    BenchOptions bench;
    auto* bench_cmd = app.add_subcommand("bench", "Reference vs parallel solve times over durations and steps");
    bench_cmd->add_option("--durations", bench.durations, "Durations in hours")->delimiter(',');
    bench_cmd->add_option("--deltas", bench.deltas, "Grid steps in MWh")->delimiter(',');
    bench_cmd->add_option("--bench-hours", bench.hours, "Horizon of the timing instance")->capture_default_str();
    bench_cmd->add_flag("--skip-reference", bench.skip_reference, "Time the parallel backend only");

    std::vector<double> plot_durations{2, 4, 8, 12, 24};
    SimulateOptions plot_opt;
    auto* plot = app.add_subcommand("plot-data", "Profit and capture ratio by duration and strategy (CSV)");
    plot->add_option("--durations", plot_durations, "Durations in hours")->delimiter(',');
    plot->add_flag("--realized", plot_opt.realized, "Build value tables from the realized prices");

    std::string variant = "milp";
    bool lp_negative = false;
    auto* lp = app.add_subcommand("export-lp", "Write the MILP/LP model of the evaluation horizon");
    lp->add_option("--variant", variant, "milp|relaxed|restricted")->capture_default_str();
    lp->add_flag("--negative", lp_negative, "Shift prices so that their maximum is 0");

    OracleOptions orc;
    auto* oracle_cmd = app.add_subcommand("oracle-check", "Randomized agreement check against brute-force oracles");
    oracle_cmd->add_option("--count", orc.count, "Stochastic instances")->capture_default_str();
    oracle_cmd->add_option("--det-count", orc.det_count, "Deterministic instances")->capture_default_str();
    oracle_cmd->add_option("--max-T", orc.max_T, "Largest stochastic horizon")->capture_default_str();
    oracle_cmd->add_option("--max-S", orc.max_S, "Largest state count")->capture_default_str();
    oracle_cmd->add_option("--max-R", orc.max_R, "Largest sample count")->capture_default_str();
    oracle_cmd->add_option("--det-max-T", orc.det_max_T, "Largest deterministic horizon")->capture_default_str();
    oracle_cmd->add_flag("--mutate", orc.mutate, "Run on a deliberately broken backend");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*forecast) return cmd_forecast(cfg);
        if (*solve) return cmd_solve(cfg, realized, dump_values);
        if (*simulate) return cmd_simulate(cfg, sim);
        if (*bench_cmd) return cmd_bench(cfg, bench);
        if (*plot) return cmd_plot_data(cfg, plot_durations, plot_opt);
        if (*lp) return cmd_export_lp(cfg, variant, lp_negative);
        if (*oracle_cmd) return cmd_oracle_check(cfg, orc);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const InvariantError& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}
