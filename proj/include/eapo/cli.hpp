#pragma once

// Command-line front end: synth, ingest, backtest, frontier, sweep, infer, dp-demo.
// Exit codes: 0 success, 1 usage or configuration, 2 data, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "eapo/backtest.hpp"
#include "eapo/config.hpp"
#include "eapo/data_io.hpp"
#include "eapo/frontier.hpp"
#include "eapo/inference.hpp"

namespace eapo {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

namespace cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline json to_json(const Vector& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline json to_json(const PerformanceMetrics& m) {
    return json{{"annualized_return", m.annualized_return},
                {"annualized_volatility", m.annualized_volatility},
                {"sharpe", m.sharpe},
                {"sortino", m.sortino},
                {"max_drawdown", m.max_drawdown},
                {"mean_daily_return", m.mean_daily},
                {"observations", m.observations}};
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file", path.string(), 0);
    out << text;
}

inline AlignedDataset load_dataset(const fs::path& data_dir, const RunConfig& cfg) {
    const RawRecords raw = ingest(data_dir);
    AlignOptions opt;
    opt.scope = cfg.scope;
    opt.strict = cfg.strict;
    opt.impute_k = cfg.impute_k;
    opt.disclosure_lag_days = cfg.disclosure_lag_days;
    opt.seed = cfg.seed;
    return align_forward_carry(raw, opt);
}

inline json report_json(const BacktestReport& rep, const AlignedDataset& ds, const RunConfig& cfg) {
    json j;
    j["strategy"] = rep.strategy;
    j["config"] = config_to_json(cfg);
    j["metrics"] = to_json(rep.metrics);
    j["average_intensity"] = rep.average_intensity;
    j["intensity_unit"] = "tCO2e per $mm revenue";
    j["total_cost"] = rep.total_cost;
    j["mean_turnover"] = rep.turnover.size() > 0 ? rep.turnover.mean() : 0.0;
    j["return_dates"] = rep.return_dates;
    j["net_returns"] = to_json(rep.net_returns);
    j["wealth"] = to_json(rep.wealth);
    j["rebalance_dates"] = rep.rebalance_dates;
    j["turnover"] = to_json(rep.turnover);
    j["intensity_path"] = to_json(rep.intensity_path);
    j["yield_path"] = to_json(rep.yield_path);
    j["solver"] = {{"iterations", rep.solver_iterations}, {"unconverged", rep.solver_unconverged}};
    std::vector<std::string> warnings = ds.warnings;
    warnings.insert(warnings.end(), rep.warnings.begin(), rep.warnings.end());
    j["warnings"] = warnings;
    Index imputed = 0, excluded = 0;
    for (Index k = 0; k < ds.provenance.rows(); ++k)
        for (Index i = 0; i < ds.provenance.cols(); ++i) {
            if (ds.provenance(k, i) == static_cast<int>(Provenance::imputed)) ++imputed;
            if (!std::isfinite(ds.intensity(k, i))) ++excluded;
        }
    j["data"] = {{"assets", ds.tickers.size()},
                 {"scope", static_cast<int>(ds.scope)},
                 {"imputed_cells", imputed},
                 {"excluded_cells", excluded}};
    return j;
}

/// Benchmark-relative diagnostics against an EW run over the same dates.
inline void add_relative(json& j, const BacktestReport& rep, const BacktestReport& ew, const AlignedDataset& ds,
                         const BacktestInput& in, double annualization) {
    if (rep.net_returns.size() >= 3 && rep.net_returns.size() == ew.net_returns.size()) {
        const TrackingStats ts = tracking(rep.net_returns, ew.net_returns, annualization);
        j["tracking_vs_ew"] = {{"beta", ts.beta},
                               {"correlation", ts.correlation},
                               {"tracking_error", ts.tracking_error},
                               {"information_ratio", ts.information_ratio}};
    }
    if (rep.weights.rows() == ew.weights.rows() && rep.weights.rows() > 0) {
        Matrix lam(rep.weights.rows(), rep.weights.cols());
        const std::size_t offset = in.rebalance_rows.size() - static_cast<std::size_t>(rep.weights.rows());
        for (Index k = 0; k < lam.rows(); ++k) lam.row(k) = ds.intensity.row(static_cast<Index>(offset) + k);
        const Attribution at = attribution_panel(ew.weights, rep.weights, lam, ds.sectors);
        j["attribution_vs_ew"] = {{"allocation", at.allocation}, {"selection", at.selection}, {"total", at.total}};
    }
    std::vector<Index> price_rows;
    for (Index r : rep.rebalance_rows) price_rows.push_back(r + 1);
    const StyleExposure st = style_diagnostics(rep.weights, ds.prices, price_rows, annualization);
    j["style"] = {{"volatility", st.volatility}, {"momentum", st.momentum}, {"dates_used", st.dates_used}};
}

inline int cmd_synth(const RunConfig& cfg, const fs::path& out) {
    SynthSpec spec = cfg.synth;
    spec.seed = cfg.seed;
    const RawRecords raw = synth_generate(spec);
    export_raw(raw, out);
    std::cout << "wrote synthetic dataset (" << spec.n_assets << " assets, " << spec.n_days << " days) to "
              << out.string() << "\n";
    return kExitOk;
}

inline int cmd_ingest(const RunConfig& cfg, const fs::path& data) {
    const RawRecords raw = ingest(data);
    const AlignedDataset ds = [&] {
        AlignOptions opt;
        opt.scope = cfg.scope;
        opt.strict = true; // validation only: no imputation
        opt.disclosure_lag_days = cfg.disclosure_lag_days;
        return align_forward_carry(raw, opt);
    }();
    json j{{"prices", raw.prices.size()},
           {"emissions", raw.emissions.size()},
           {"revenues", raw.revenues.size()},
           {"sectors", raw.sectors.size()},
           {"assets", ds.tickers.size()},
           {"dates", ds.price_dates.size()},
           {"rebalances", ds.rebalance_dates.size()},
           {"warnings", ds.warnings}};
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

inline int cmd_backtest(const RunConfig& cfg, const fs::path& data, const fs::path& out, const std::string& which) {
    const AlignedDataset ds = load_dataset(data, cfg);
    const BacktestInput in = ds.backtest_input();
    std::vector<Strategy> strategies;
    if (which == "all") strategies = {Strategy::ew, Strategy::gmv_invvar, Strategy::emw, Strategy::eapo};
    else strategies = {strategy_from_string(which)};
    // EW is the benchmark for relative statistics and for infer; always written.
    if (strategies.front() != Strategy::ew) strategies.insert(strategies.begin(), Strategy::ew);
    fs::create_directories(out);

    BacktestConfig ew_cfg = cfg.backtest;
    ew_cfg.strategy = Strategy::ew;
    const BacktestReport ew = run_backtest(in, ew_cfg);
    for (Strategy s : strategies) {
        BacktestConfig bc = cfg.backtest;
        bc.strategy = s;
        bc.solver.seed = cfg.seed;
        const BacktestReport rep = s == Strategy::ew ? ew : run_backtest(in, bc);
        json j = report_json(rep, ds, cfg);
        add_relative(j, rep, ew, ds, in, bc.annualization);
        write_text(out / ("report_" + rep.strategy + ".json"), j.dump(2) + "\n");
        write_weights_csv(rep, out / ("weights_" + rep.strategy + ".csv"));
        std::cout << rep.strategy << ": sharpe " << format_double(rep.metrics.sharpe) << ", average intensity "
                  << format_double(rep.average_intensity) << "\n";
    }
    return kExitOk;
}

/// Window statistics at the last rebalance with full history.
struct FrontierInputs {
    Vector r;
    Vector mu_e;
    Matrix sigma;
    Vector L;
    IntensityVector lambda;
};

inline FrontierInputs frontier_inputs(const AlignedDataset& ds, const RunConfig& cfg) {
    const int lb = cfg.backtest.lookback;
    for (std::size_t k = ds.rebalance_rows.size(); k-- > 0;) {
        const Index t = ds.rebalance_rows[k];
        if (t < lb) break;
        std::vector<Index> active;
        for (Index i = 0; i < ds.intensity.cols(); ++i)
            if (std::isfinite(ds.intensity(static_cast<Index>(k), i))) active.push_back(i);
        if (active.empty()) continue;
        const auto na = static_cast<Index>(active.size());
        ReturnMatrix window(lb, na);
        Vector lam(na);
        for (Index j = 0; j < na; ++j) {
            window.col(j) = ds.returns.block(t - lb, active[static_cast<std::size_t>(j)], lb, 1);
            lam[j] = ds.intensity(static_cast<Index>(k), active[static_cast<std::size_t>(j)]);
        }
        FrontierInputs fi;
        fi.lambda = IntensityVector(lam, cfg.scope);
        fi.r = rolling_mean(window);
        PenaltyParams pp;
        pp.m = cfg.backtest.solver.m;
        fi.mu_e = emissions_adjusted_mean(window, fi.lambda, pp);
        fi.sigma = ledoit_wolf(window, cfg.backtest.shrinkage).sigma_hat;
        fi.L = Vector::Zero(na);
        if (auto lc = lipschitz_constants(window, fi.lambda, pp)) fi.L = *lc;
        return fi;
    }
    throw InsufficientData("frontier: no rebalance date has enough history");
}

inline int cmd_frontier(const RunConfig& cfg, const fs::path& data, const fs::path& out) {
    const AlignedDataset ds = load_dataset(data, cfg);
    const FrontierInputs fi = frontier_inputs(ds, cfg);
    double mu_max = cfg.mu_max;
    if (!(mu_max > 0.0)) {
        // largest pairwise crossover r_i - mu lambda_i = r_j - mu lambda_j
        for (Index i = 0; i < fi.r.size(); ++i)
            for (Index j = 0; j < fi.r.size(); ++j)
                if (fi.lambda[i] > fi.lambda[j] && fi.r[i] > fi.r[j])
                    mu_max = std::max(mu_max, (fi.r[i] - fi.r[j]) / (fi.lambda[i] - fi.lambda[j]));
        mu_max = mu_max > 0.0 ? 1.25 * mu_max : 1.0;
    }
    if (cfg.mu_points < 3) throw ConfigError("frontier: mu_points must be >= 3");
    const Vector grid = Vector::LinSpaced(cfg.mu_points, 0.0, mu_max);
    const std::vector<FrontierPoint> pts =
        cfg.frontier_mode == "vertex"
            ? pareto_sweep(fi.r, fi.lambda, grid)
            : pareto_sweep_regularized(fi.r, fi.mu_e, fi.sigma, fi.L, fi.lambda, cfg.backtest.solver, grid);
    fs::create_directories(out);
    std::ofstream f(out / "frontier.csv", std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write file", (out / "frontier.csv").string(), 0);
    f << "mu,mean_return,intensity,value\n";
    for (const auto& p : pts)
        f << format_double(p.mu_weight) << ',' << format_double(p.mean_return) << ',' << format_double(p.intensity)
          << ',' << format_double(p.value) << '\n';
    const FrontierReport rep = frontier_diagnostics(pts);
    json j{{"points", pts.size()},
           {"mode", cfg.frontier_mode},
           {"convexity_violations", rep.convexity_violations.size()},
           {"slope_violations", rep.slope_violations.size()},
           {"monotonicity_violations", rep.monotonicity_violations.size()},
           {"slopes_checked", rep.slopes_checked}};
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

inline int cmd_sweep(const RunConfig& cfg, const fs::path& data, const fs::path& out) {
    const AlignedDataset ds = load_dataset(data, cfg);
    const BacktestInput in = ds.backtest_input();
    fs::create_directories(out);
    std::ofstream f(out / "sweep.csv", std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write file", (out / "sweep.csv").string(), 0);
    f << "gamma,theta,m,sharpe,annualized_return,annualized_volatility,max_drawdown,average_intensity,mean_turnover\n";
    for (double g : cfg.gamma_grid)
        for (double th : cfg.theta_grid)
            for (int m : cfg.m_grid) {
                BacktestConfig bc = cfg.backtest;
                bc.strategy = Strategy::eapo;
                bc.solver.gamma = g;
                bc.solver.theta = th;
                bc.solver.m = m;
                const BacktestReport rep = run_backtest(in, bc);
                f << format_double(g) << ',' << format_double(th) << ',' << m << ','
                  << format_double(rep.metrics.sharpe) << ',' << format_double(rep.metrics.annualized_return) << ','
                  << format_double(rep.metrics.annualized_volatility) << ','
                  << format_double(rep.metrics.max_drawdown) << ',' << format_double(rep.average_intensity) << ','
                  << format_double(rep.turnover.mean()) << '\n';
            }
    std::cout << "wrote " << (out / "sweep.csv").string() << "\n";
    return kExitOk;
}

inline std::pair<std::vector<std::string>, Vector> read_report_returns(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open report", path.string(), 0);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed report: ") + e.what(), path.string(), 0);
    }
    if (!j.contains("net_returns") || !j.contains("return_dates"))
        throw DataError("report lacks net_returns/return_dates", path.string(), 0);
    std::vector<std::string> dates = j["return_dates"].get<std::vector<std::string>>();
    std::vector<double> r;
    for (const auto& v : j["net_returns"]) {
        if (!v.is_number()) throw DataError("non-numeric net return", path.string(), 0);
        r.push_back(v.get<double>());
    }
    if (dates.size() != r.size()) throw DataError("return_dates and net_returns differ in length", path.string(), 0);
    return {dates, Eigen::Map<const Vector>(r.data(), static_cast<Index>(r.size()))};
}

inline int cmd_infer(const RunConfig& cfg, const fs::path& a, const fs::path& b, const std::string& out) {
    const auto [dates_a, ra] = read_report_returns(a);
    const auto [dates_b, rb] = read_report_returns(b);
    if (dates_a != dates_b) throw DataError("reports cover different return calendars", b.string(), 0);
    const HacResult hac = newey_west(ra - rb, cfg.bandwidth);
    const BootstrapResult bs =
        block_bootstrap_sharpe(ra, rb, cfg.block_length, cfg.replications, cfg.seed, cfg.backtest.annualization);
    json j;
    j["pair"] = {a.filename().string(), b.filename().string()};
    j["hac"] = {{"mean_diff", hac.mean_diff},
                {"long_run_variance", hac.long_run_variance},
                {"standard_error", hac.standard_error},
                {"t_stat", hac.t_stat},
                {"raw_t_stat", hac.raw_t_stat},
                {"bandwidth", hac.bandwidth},
                {"observations", hac.observations},
                {"warnings", hac.warnings}};
    j["bootstrap"] = {{"sharpe_a", bs.sharpe_a},
                      {"sharpe_b", bs.sharpe_b},
                      {"diff", bs.diff},
                      {"ci_low", bs.ci_low},
                      {"ci_high", bs.ci_high},
                      {"replications", bs.replications},
                      {"block_length", bs.block_length},
                      {"seed", cfg.seed}};
    const std::string text = j.dump(2) + "\n";
    std::cout << text;
    if (!out.empty()) {
        fs::create_directories(out);
        write_text(fs::path(out) / "infer.json", text);
    }
    return kExitOk;
}

/// Random tiny spec: payoffs around 1 with one scalar disturbance per period.
inline TinyDynamicSpec random_tiny_spec(const RunConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    TinyDynamicSpec spec;
    spec.horizon = cfg.dp_horizon;
    spec.n = cfg.dp_assets;
    spec.beta = cfg.dp_beta;
    spec.grid_step = cfg.dp_grid_step;
    if (cfg.dp_disturbances < 1) throw ConfigError("dp-demo: dp_disturbances must be >= 1");
    for (int t = 0; t <= spec.horizon; ++t) {
        Vector g(spec.n);
        Matrix d(spec.n, 1);
        for (Index i = 0; i < spec.n; ++i) {
            g[i] = 1.0 + 0.05 * unif(rng);
            d(i, 0) = 0.05 * unif(rng);
        }
        std::vector<Vector> zs;
        for (int s = 0; s < cfg.dp_disturbances; ++s) zs.push_back(Vector::Constant(1, unif(rng)));
        spec.gammas.push_back(g);
        spec.deltas.push_back(d);
        spec.z_sets.push_back(zs);
    }
    return spec;
}

inline int cmd_dp_demo(const RunConfig& cfg) {
    const TinyDynamicSpec spec = random_tiny_spec(cfg, cfg.seed);
    const double v0 = bellman_tiny(spec);
    json j{{"v0", v0},
           {"horizon", spec.horizon},
           {"assets", spec.n},
           {"disturbances", cfg.dp_disturbances},
           {"grid_step", spec.grid_step},
           {"beta", spec.beta},
           {"seed", cfg.seed}};
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

} // namespace cli

/// Parses argv, runs one subcommand and maps failures to exit codes.
inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Emissions-aware robust portfolio optimization"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir = "data", strategy = "all";
    std::uint64_t seed = 0;
    int scope = 0;
    bool strict = false;
    std::vector<std::string> reports;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Config file (.json, or flat TOML)")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Random seed");
    };
    auto data_opts = [&](CLI::App* sub) {
        sub->add_option("--data", data_dir, "Dataset directory")->capture_default_str();
        sub->add_option("--scope", scope, "Emissions scope")->check(CLI::Range(1, 3));
        sub->add_flag("--strict", strict, "Exclude assets without an observed intensity instead of imputing");
    };

    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    common(synth);
    synth->add_option("--out", out_dir, "Output directory")->required();

    CLI::App* ingest_cmd = app.add_subcommand("ingest", "Validate a dataset");
    common(ingest_cmd);
    data_opts(ingest_cmd);

    CLI::App* backtest = app.add_subcommand("backtest", "Run one strategy or all");
    common(backtest);
    data_opts(backtest);
    backtest->add_option("--out", out_dir, "Output directory")->required();
    backtest->add_option("--strategy", strategy, "ew, gmv_invvar, gmv_full, emw, eapo or all")->capture_default_str();

    CLI::App* frontier = app.add_subcommand("frontier", "Return-intensity frontier sweep");
    common(frontier);
    data_opts(frontier);
    frontier->add_option("--out", out_dir, "Output directory")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "Gamma/theta/m grid of EAPO backtests");
    common(sweep);
    data_opts(sweep);
    sweep->add_option("--out", out_dir, "Output directory")->required();

    CLI::App* infer = app.add_subcommand("infer", "HAC and bootstrap tests on two reports");
    common(infer);
    infer->add_option("reports", reports, "Two report JSON files")->required()->expected(2);
    infer->add_option("--out", out_dir, "Output directory for infer.json");

    CLI::App* dp = app.add_subcommand("dp-demo", "Tiny robust Bellman recursion");
    common(dp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) load_config_file(cfg, config_path);
        if (seed != 0 || app.get_subcommands().front()->count("--seed") > 0) {
            cfg.seed = seed;
            cfg.backtest.solver.seed = seed;
        }
        if (scope != 0) cfg.scope = scope_from_int(scope);
        if (strict) cfg.strict = true;

        if (synth->parsed()) return cli::cmd_synth(cfg, out_dir);
        if (ingest_cmd->parsed()) return cli::cmd_ingest(cfg, data_dir);
        if (backtest->parsed()) return cli::cmd_backtest(cfg, data_dir, out_dir, strategy);
        if (frontier->parsed()) return cli::cmd_frontier(cfg, data_dir, out_dir);
        if (sweep->parsed()) return cli::cmd_sweep(cfg, data_dir, out_dir);
        if (infer->parsed()) return cli::cmd_infer(cfg, reports[0], reports[1], out_dir);
        if (dp->parsed()) return cli::cmd_dp_demo(cfg);
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}

} // namespace eapo
