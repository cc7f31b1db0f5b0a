#pragma once

// Rolling rebalance engine: benchmark and EAPO strategies, proportional
// transaction costs, buy-and-hold drift between rebalances, performance and
// footprint metrics, intensity attribution, tracking and style diagnostics.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eapo/estimation.hpp"
#include "eapo/inference.hpp"
#include "eapo/penalty.hpp"
#include "eapo/solver.hpp"
#include "eapo/types.hpp"

namespace eapo {

enum class Strategy { ew, gmv_invvar, gmv_full, emw, eapo };

inline std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::ew: return "ew";
    case Strategy::gmv_invvar: return "gmv_invvar";
    case Strategy::gmv_full: return "gmv_full";
    case Strategy::emw: return "emw";
    case Strategy::eapo: return "eapo";
    }
    return "?";
}

inline Strategy strategy_from_string(const std::string& s) {
    if (s == "ew") return Strategy::ew;
    if (s == "gmv" || s == "gmv_invvar") return Strategy::gmv_invvar;
    if (s == "gmv_full") return Strategy::gmv_full;
    if (s == "emw") return Strategy::emw;
    if (s == "eapo") return Strategy::eapo;
    throw ConfigError("unknown strategy '" + s + "' (expected ew, gmv_invvar, gmv_full, emw, eapo)");
}

// ---------------------------------------------------------------------------
// Benchmark weights
// ---------------------------------------------------------------------------

inline WeightVector weights_ew(Index n) { return equal_weights(n); }

enum class GmvMode { inverse_variance, full };

/// inverse_variance: x_i ~ 1/sigma_ii. full: Sigma^{-1} 1 normalized; a
/// singular Sigma is jittered first. The full solution may have negative entries.
inline WeightVector weights_gmv(const Eigen::Ref<const Matrix>& sigma, GmvMode mode = GmvMode::inverse_variance) {
    const Index n = sigma.rows();
    detail::require_shape(n == sigma.cols() && n > 0, "weights_gmv: sigma must be square and nonempty");
    if (!sigma.allFinite()) throw InvalidInput("weights_gmv: non-finite covariance");
    if (mode == GmvMode::inverse_variance) {
        const Vector d = sigma.diagonal();
        if ((d.array() <= 0.0).any()) throw InvalidInput("weights_gmv: variances must be > 0");
        const Vector inv = d.cwiseInverse();
        return inv / inv.sum();
    }
    Matrix s = sigma;
    make_positive_definite(s);
    Eigen::LDLT<Matrix> ldlt(s);
    if (ldlt.info() != Eigen::Success) throw NumericalError("weights_gmv: factorization failed");
    const Vector z = ldlt.solve(Vector::Ones(n));
    const double total = z.sum();
    if (!std::isfinite(total) || total == 0.0) throw NumericalError("weights_gmv: degenerate solution");
    return z / total;
}

/// x_i ~ 1/g_i over assets with g_i > 0; missing (NaN) or nonpositive entries get 0.
inline WeightVector weights_emw(const Eigen::Ref<const Vector>& emissions) {
    Vector w = Vector::Zero(emissions.size());
    for (Index i = 0; i < emissions.size(); ++i)
        if (std::isfinite(emissions[i]) && emissions[i] > 0.0) w[i] = 1.0 / emissions[i];
    const double total = w.sum();
    if (!(total > 0.0)) throw InsufficientData("weights_emw: no asset with positive disclosed emissions");
    return w / total;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct PerformanceMetrics {
    double annualized_return = 0.0;
    double annualized_volatility = 0.0;
    double sharpe = 0.0;
    double sortino = 0.0;
    double max_drawdown = 0.0;
    double mean_daily = 0.0;
    Index observations = 0;
};

/// Largest peak-to-trough loss of the compounded path, starting from wealth 1.
inline double max_drawdown(const Eigen::Ref<const Vector>& net_returns) {
    double wealth = 1.0;
    double peak = 1.0;
    double mdd = 0.0;
    for (Index t = 0; t < net_returns.size(); ++t) {
        wealth *= 1.0 + net_returns[t];
        peak = std::max(peak, wealth);
        mdd = std::min(mdd, wealth / peak - 1.0);
    }
    return mdd;
}

/// Geometric annualized return, std * sqrt(a) volatility, Sharpe from the daily
/// mean and sample std, Sortino against the downside deviation
/// sqrt(mean(min(r, 0)^2)) (NaN when no return is negative).
inline PerformanceMetrics performance_metrics(const Eigen::Ref<const Vector>& r, double annualization = kTradingDays) {
    const Index T = r.size();
    if (T < 2) throw InsufficientData("performance_metrics: need >= 2 returns");
    if (!r.allFinite()) throw InvalidInput("performance_metrics: non-finite returns");
    PerformanceMetrics m;
    m.observations = T;
    m.mean_daily = r.mean();
    double log_growth = 0.0;
    for (Index t = 0; t < T; ++t) log_growth += std::log1p(r[t]);
    m.annualized_return = std::expm1(log_growth * annualization / static_cast<double>(T));
    const double sd = std::sqrt((r.array() - m.mean_daily).square().sum() / static_cast<double>(T - 1));
    m.annualized_volatility = sd * std::sqrt(annualization);
    m.sharpe = sd > 0.0 ? m.mean_daily / sd * std::sqrt(annualization) : nan_value;
    const double downside = std::sqrt(r.cwiseMin(0.0).array().square().mean());
    m.sortino = downside > 0.0 ? m.mean_daily / downside * std::sqrt(annualization) : nan_value;
    m.max_drawdown = max_drawdown(r);
    return m;
}

struct TrackingStats {
    double beta = 0.0;
    double correlation = 0.0;
    double tracking_error = 0.0;
    double information_ratio = 0.0;
};

/// Sample (T - 1) moments; undefined quantities are NaN.
inline TrackingStats tracking(const Eigen::Ref<const Vector>& s, const Eigen::Ref<const Vector>& b,
                              double annualization = kTradingDays) {
    const Index T = s.size();
    if (b.size() != T) throw ShapeError("tracking: series differ in length");
    if (T < 3) throw InsufficientData("tracking: need >= 3 observations");
    const double ms = s.mean();
    const double mb = b.mean();
    const double denom = static_cast<double>(T - 1);
    const double cov = ((s.array() - ms) * (b.array() - mb)).sum() / denom;
    const double vs = (s.array() - ms).square().sum() / denom;
    const double vb = (b.array() - mb).square().sum() / denom;
    const Vector active = s - b;
    const double ma = active.mean();
    const double va = (active.array() - ma).square().sum() / denom;

    TrackingStats out;
    out.beta = vb > 0.0 ? cov / vb : nan_value;
    out.correlation = vs > 0.0 && vb > 0.0 ? cov / std::sqrt(vs * vb) : nan_value;
    out.tracking_error = std::sqrt(va) * std::sqrt(annualization);
    out.information_ratio = out.tracking_error > 0.0 ? ma * annualization / out.tracking_error : nan_value;
    return out;
}

struct IntensityMetrics {
    Vector intensity_path; // Lambda_k = x_{k-1}' lambda_k
    Vector yield_path;     // Lambda_k / r_k, NaN when r_k == 0
    double average_intensity = 0.0;
};

/// Row k of the weight panel holds the weights chosen at rebalance k; row k of
/// the intensity panel the intensities known at rebalance k; period_returns[k]
/// the net return realized between rebalance k - 1 and k. Entries k >= 1 are
/// reported. NaN intensities (excluded assets) must carry zero weight.
inline IntensityMetrics intensity_metrics(const Eigen::Ref<const Matrix>& weight_panel,
                                          const Eigen::Ref<const Matrix>& intensity_panel,
                                          const Eigen::Ref<const Vector>& period_returns) {
    const Index K = weight_panel.rows();
    detail::require_shape(intensity_panel.rows() == K && intensity_panel.cols() == weight_panel.cols() &&
                              period_returns.size() == K,
                          "intensity_metrics: panels are not aligned");
    IntensityMetrics out;
    if (K < 2) {
        out.intensity_path.resize(0);
        out.yield_path.resize(0);
        out.average_intensity = nan_value;
        return out;
    }
    out.intensity_path.resize(K - 1);
    out.yield_path.resize(K - 1);
    for (Index k = 1; k < K; ++k) {
        double lam = 0.0;
        for (Index i = 0; i < weight_panel.cols(); ++i) {
            const double w = weight_panel(k - 1, i);
            if (w == 0.0) continue;
            const double li = intensity_panel(k, i);
            if (!std::isfinite(li)) throw InvalidInput("intensity_metrics: held asset has no intensity");
            lam += w * li;
        }
        out.intensity_path[k - 1] = lam;
        out.yield_path[k - 1] = period_returns[k] != 0.0 ? lam / period_returns[k] : nan_value;
    }
    out.average_intensity = out.intensity_path.mean();
    return out;
}

struct Attribution {
    double allocation = 0.0;
    double selection = 0.0;
    double total = 0.0;
};

/// Brinson-style decomposition of Lambda^B - Lambda^A into a sector allocation
/// term sum_s (w^B_s - w^A_s) lbar^B_s and a within-sector selection term,
/// the latter computed as the residual. lbar_s is the weight-averaged sector
/// intensity, or the simple mean when the sector weight is zero. Empty sector
/// labels map to "UNKNOWN".
inline Attribution attribution(const Eigen::Ref<const Vector>& weights_a, const Eigen::Ref<const Vector>& weights_b,
                               const Eigen::Ref<const Vector>& intensities, const std::vector<std::string>& sectors) {
    const Index n = intensities.size();
    detail::require_shape(weights_a.size() == n && weights_b.size() == n &&
                              static_cast<Index>(sectors.size()) == n,
                          "attribution: inputs differ in length");
    struct Agg {
        double wa = 0.0, wb = 0.0, la = 0.0, lb = 0.0, plain = 0.0;
        int count = 0;
    };
    std::map<std::string, Agg> agg;
    double lam_a = 0.0, lam_b = 0.0;
    for (Index i = 0; i < n; ++i) {
        const std::string& s = sectors[static_cast<std::size_t>(i)].empty() ? std::string("UNKNOWN")
                                                                            : sectors[static_cast<std::size_t>(i)];
        Agg& g = agg[s];
        g.wa += weights_a[i];
        g.wb += weights_b[i];
        g.la += weights_a[i] * intensities[i];
        g.lb += weights_b[i] * intensities[i];
        g.plain += intensities[i];
        ++g.count;
        lam_a += weights_a[i] * intensities[i];
        lam_b += weights_b[i] * intensities[i];
    }
    Attribution out;
    for (const auto& [name, g] : agg) {
        const double lbar_b = g.wb != 0.0 ? g.lb / g.wb : g.plain / g.count;
        out.allocation += (g.wb - g.wa) * lbar_b;
    }
    out.total = lam_b - lam_a;
    out.selection = out.total - out.allocation;
    return out;
}

/// Direct within-sector term sum_s w^A_s (lbar^B_s - lbar^A_s), for cross-checks.
inline double attribution_selection_direct(const Eigen::Ref<const Vector>& weights_a,
                                           const Eigen::Ref<const Vector>& weights_b,
                                           const Eigen::Ref<const Vector>& intensities,
                                           const std::vector<std::string>& sectors) {
    std::map<std::string, std::vector<Index>> members;
    for (Index i = 0; i < intensities.size(); ++i) {
        const auto& s = sectors[static_cast<std::size_t>(i)];
        members[s.empty() ? "UNKNOWN" : s].push_back(i);
    }
    double sel = 0.0;
    for (const auto& [name, idx] : members) {
        double wa = 0.0, wb = 0.0, la = 0.0, lb = 0.0, plain = 0.0;
        for (Index i : idx) {
            wa += weights_a[i];
            wb += weights_b[i];
            la += weights_a[i] * intensities[i];
            lb += weights_b[i] * intensities[i];
            plain += intensities[i];
        }
        const double mean = plain / static_cast<double>(idx.size());
        sel += wa * ((wb != 0.0 ? lb / wb : mean) - (wa != 0.0 ? la / wa : mean));
    }
    return sel;
}

/// Panel version: per-rebalance decompositions averaged over dates. The
/// selection term is again the residual, so the identity holds exactly.
inline Attribution attribution_panel(const Eigen::Ref<const Matrix>& weights_a, const Eigen::Ref<const Matrix>& weights_b,
                                     const Eigen::Ref<const Matrix>& intensity_panel,
                                     const std::vector<std::string>& sectors) {
    detail::require_shape(weights_a.rows() == weights_b.rows() && weights_a.rows() == intensity_panel.rows() &&
                              weights_a.rows() > 0,
                          "attribution_panel: panels are not aligned");
    Attribution out;
    const double K = static_cast<double>(weights_a.rows());
    double lam_a = 0.0, lam_b = 0.0;
    for (Index k = 0; k < weights_a.rows(); ++k) {
        Vector lam = intensity_panel.row(k).transpose();
        for (Index i = 0; i < lam.size(); ++i)
            if (!std::isfinite(lam[i])) lam[i] = 0.0; // excluded assets carry no weight
        const Vector wa = weights_a.row(k).transpose();
        const Vector wb = weights_b.row(k).transpose();
        out.allocation += attribution(wa, wb, lam, sectors).allocation / K;
        lam_a += wa.dot(lam) / K;
        lam_b += wb.dot(lam) / K;
    }
    out.total = lam_b - lam_a;
    out.selection = out.total - out.allocation;
    return out;
}

struct StyleExposure {
    double volatility = 0.0; // weighted annualized stock volatility
    double momentum = 0.0;   // weighted 12-1 momentum
    Index dates_used = 0;
};

/// At each rebalance price index p with p >= 252: volatility of daily simple
/// returns over p-252..p (annualized) and momentum P[p-21] / P[p-252] - 1,
/// weighted by that date's weights, then averaged over dates.
inline StyleExposure style_diagnostics(const Eigen::Ref<const Matrix>& weight_panel, const Eigen::Ref<const Matrix>& prices,
                                       const std::vector<Index>& price_rows, double annualization = kTradingDays) {
    detail::require_shape(weight_panel.rows() == static_cast<Index>(price_rows.size()) &&
                              weight_panel.cols() == prices.cols(),
                          "style_diagnostics: panels are not aligned");
    StyleExposure out;
    const Index n = prices.cols();
    for (std::size_t k = 0; k < price_rows.size(); ++k) {
        const Index p = price_rows[k];
        if (p < 252 || p >= prices.rows()) continue;
        double vol = 0.0, mom = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double w = weight_panel(static_cast<Index>(k), i);
            if (w == 0.0) continue;
            Vector r(252);
            for (Index t = 0; t < 252; ++t) r[t] = prices(p - 251 + t, i) / prices(p - 252 + t, i) - 1.0;
            const double mean = r.mean();
            const double sd = std::sqrt((r.array() - mean).square().sum() / 251.0);
            vol += w * sd * std::sqrt(annualization);
            mom += w * (prices(p - 21, i) / prices(p - 252, i) - 1.0);
        }
        out.volatility += vol;
        out.momentum += mom;
        ++out.dates_used;
    }
    if (out.dates_used > 0) {
        out.volatility /= static_cast<double>(out.dates_used);
        out.momentum /= static_cast<double>(out.dates_used);
    }
    return out;
}

/// Price path implied by gross returns, starting from 1 (one more row than returns).
inline Matrix prices_from_returns(const Eigen::Ref<const ReturnMatrix>& returns) {
    Matrix p(returns.rows() + 1, returns.cols());
    p.row(0).setOnes();
    for (Index t = 0; t < returns.rows(); ++t) p.row(t + 1) = p.row(t).cwiseProduct(returns.row(t));
    return p;
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// Inputs of one backtest. Return row t is the gross return realized on
/// dates[t]. A rebalance at row t trades at the close of dates[t] using return
/// rows t - lookback .. t - 1 and the intensities of that rebalance; the new
/// weights earn returns from row t + 1.
struct BacktestInput {
    std::vector<std::string> dates;
    std::vector<std::string> tickers;
    ReturnMatrix returns;             // T x n gross returns
    std::vector<Index> rebalance_rows; // ascending
    Matrix intensity;                 // R x n, NaN marks an asset excluded at that date
    Matrix emissions;                 // R x n disclosed scope-1 emissions for EMW, NaN when missing
    std::vector<std::string> sectors; // per asset, may be empty

    void validate() const {
        const Index n = returns.cols();
        const auto R = static_cast<Index>(rebalance_rows.size());
        detail::require_shape(static_cast<Index>(dates.size()) == returns.rows(), "backtest: dates and returns differ");
        detail::require_shape(static_cast<Index>(tickers.size()) == n, "backtest: tickers and returns differ");
        detail::require_shape(intensity.rows() == R && intensity.cols() == n, "backtest: intensity panel shape");
        if (emissions.size() > 0)
            detail::require_shape(emissions.rows() == R && emissions.cols() == n, "backtest: emissions panel shape");
        if (!sectors.empty())
            detail::require_shape(static_cast<Index>(sectors.size()) == n, "backtest: sector labels shape");
        if (!returns.allFinite()) throw InvalidInput("backtest: non-finite returns");
        if ((returns.array() <= 0.0).any()) throw InvalidInput("backtest: gross returns must be > 0");
        for (std::size_t k = 0; k < rebalance_rows.size(); ++k) {
            if (rebalance_rows[k] < 0 || rebalance_rows[k] >= returns.rows())
                throw InvalidInput("backtest: rebalance row out of range");
            if (k > 0 && rebalance_rows[k] <= rebalance_rows[k - 1])
                throw InvalidInput("backtest: rebalance rows must be strictly ascending");
        }
    }
};

struct BacktestConfig {
    int lookback = 252;
    double cost_bps = 2.0;
    Strategy strategy = Strategy::eapo;
    SolverConfig solver = [] {
        SolverConfig c;
        c.gamma = 3.5;
        c.theta = 0.5;
        c.m = 10;
        return c;
    }();
    ShrinkageTarget shrinkage = ShrinkageTarget::constant_correlation;
    double annualization = kTradingDays;

    void validate() const {
        if (lookback < 2) throw ConfigError("BacktestConfig: lookback must be >= 2");
        if (!(cost_bps >= 0.0) || !std::isfinite(cost_bps)) throw ConfigError("BacktestConfig: cost_bps must be >= 0");
        if (!(annualization > 0.0)) throw ConfigError("BacktestConfig: annualization must be > 0");
        solver.validate();
    }
};

struct BacktestReport {
    std::string strategy;
    std::vector<std::string> return_dates; // dates of net_returns / wealth
    Vector net_returns;
    Vector wealth;
    std::vector<std::string> rebalance_dates;
    std::vector<Index> rebalance_rows;
    Vector turnover;
    Vector period_returns; // net return since the previous rebalance
    Matrix weights;        // rebalances used x n
    Vector intensity_path;
    Vector yield_path;
    double average_intensity = 0.0;
    double total_cost = 0.0;
    PerformanceMetrics metrics;
    int solver_iterations = 0;
    int solver_unconverged = 0;
    std::vector<std::string> tickers;
    std::vector<std::string> warnings;
};

namespace detail {

inline WeightVector scatter(const WeightVector& sub, const std::vector<Index>& active, Index n) {
    WeightVector x = WeightVector::Zero(n);
    for (std::size_t j = 0; j < active.size(); ++j) x[active[j]] = sub[static_cast<Index>(j)];
    return x;
}

} // namespace detail

/// Target weights at rebalance k (weights computed from data strictly before
/// the rebalance date). `previous` is the previous target, used as warm start.
inline WeightVector strategy_weights(const BacktestInput& in, const BacktestConfig& cfg, std::size_t k,
                                     const std::optional<WeightVector>& previous, BacktestReport* report = nullptr) {
    const Index n = in.returns.cols();
    const Index t = in.rebalance_rows[k];
    std::vector<Index> active;
    for (Index i = 0; i < n; ++i)
        if (std::isfinite(in.intensity(static_cast<Index>(k), i))) active.push_back(i);
    if (active.empty()) throw InsufficientData("backtest: no asset with a usable intensity at " + in.dates[static_cast<std::size_t>(t)]);
    const auto na = static_cast<Index>(active.size());

    if (cfg.strategy == Strategy::ew) return detail::scatter(weights_ew(na), active, n);
    if (cfg.strategy == Strategy::emw) {
        if (in.emissions.size() == 0) throw InvalidInput("backtest: EMW needs an emissions panel");
        Vector g(na);
        for (Index j = 0; j < na; ++j) g[j] = in.emissions(static_cast<Index>(k), active[static_cast<std::size_t>(j)]);
        return detail::scatter(weights_emw(g), active, n);
    }

    ReturnMatrix window(cfg.lookback, na);
    for (Index j = 0; j < na; ++j)
        window.col(j) = in.returns.block(t - cfg.lookback, active[static_cast<std::size_t>(j)], cfg.lookback, 1);
    const ShrinkageResult shrink = ledoit_wolf(window, cfg.shrinkage);

    if (cfg.strategy == Strategy::gmv_invvar)
        return detail::scatter(weights_gmv(shrink.sigma_hat, GmvMode::inverse_variance), active, n);
    if (cfg.strategy == Strategy::gmv_full) {
        WeightVector x = weights_gmv(shrink.sigma_hat, GmvMode::full);
        if (x.minCoeff() < 0.0) {
            // Long-only fallback: minimum variance over the simplex.
            SolverConfig mv;
            mv.gamma = 0.0;
            mv.theta = 1.0;
            x = solve_robust_mv(Vector::Zero(na), shrink.sigma_hat, Vector::Zero(na), mv).weights;
        }
        return detail::scatter(x, active, n);
    }

    Vector lam(na);
    for (Index j = 0; j < na; ++j) lam[j] = in.intensity(static_cast<Index>(k), active[static_cast<std::size_t>(j)]);
    const IntensityVector iv(lam);
    PenaltyParams pp;
    pp.m = cfg.solver.m;
    const Vector mu_e = emissions_adjusted_mean(window, iv, pp);
    SolverConfig sc = cfg.solver;
    Vector L = Vector::Zero(na);
    if (auto lc = lipschitz_constants(window, iv, pp)) L = *lc;
    else if (!sc.absorb_lipschitz) sc.gamma = 0.0;

    WeightVector warm = equal_weights(na);
    if (previous) {
        Vector sub(na);
        for (Index j = 0; j < na; ++j) sub[j] = (*previous)[active[static_cast<std::size_t>(j)]];
        if (sub.sum() > 0.0) warm = project_simplex(sub / sub.sum());
    }
    const SolveResult res = solve_robust_mv(mu_e, shrink.sigma_hat, L, sc, warm);
    if (report) {
        report->solver_iterations += res.diagnostics.iterations;
        if (!res.diagnostics.converged) ++report->solver_unconverged;
    }
    return detail::scatter(res.weights, active, n);
}

inline BacktestReport run_backtest(const BacktestInput& in, const BacktestConfig& cfg) {
    cfg.validate();
    in.validate();
    const Index n = in.returns.cols();
    const Index T = in.returns.rows();

    BacktestReport rep;
    rep.strategy = to_string(cfg.strategy);
    rep.tickers = in.tickers;

    std::size_t first = 0;
    while (first < in.rebalance_rows.size() && in.rebalance_rows[first] < cfg.lookback) ++first;
    if (first > 0)
        rep.warnings.push_back("skipped " + std::to_string(first) + " leading rebalances with insufficient history");
    if (first >= in.rebalance_rows.size()) throw InsufficientData("backtest: no rebalance date has enough history");

    const double c = cfg.cost_bps * 1e-4;
    const Index t0 = in.rebalance_rows[first];
    const std::size_t used = in.rebalance_rows.size() - first;
    rep.weights.resize(static_cast<Index>(used), n);
    rep.turnover.resize(static_cast<Index>(used));
    rep.period_returns.resize(static_cast<Index>(used));
    Matrix intensity_used(static_cast<Index>(used), n);

    std::vector<double> net, wealth_path;
    net.reserve(static_cast<std::size_t>(T - t0));
    wealth_path.reserve(static_cast<std::size_t>(T - t0));

    WeightVector drift = WeightVector::Zero(n);
    std::optional<WeightVector> previous;
    double wealth = 1.0;
    double wealth_at_last_rebalance = 1.0;
    std::size_t next = first;
    for (Index t = t0; t < T; ++t) {
        double day_start = wealth;
        if (t > t0) {
            const double gross = drift.dot(in.returns.row(t).transpose());
            wealth *= gross;
            drift = drift.cwiseProduct(in.returns.row(t).transpose()) / gross;
        }
        if (next < in.rebalance_rows.size() && in.rebalance_rows[next] == t) {
            const auto k = static_cast<Index>(next - first);
            WeightVector x = strategy_weights(in, cfg, next, previous, &rep);
            const double to = (x - drift).lpNorm<1>();
            const double cost = c * to;
            wealth *= 1.0 - cost;
            rep.total_cost += cost;
            rep.weights.row(k) = x.transpose();
            rep.turnover[k] = to;
            rep.period_returns[k] = k == 0 ? 0.0 : wealth / wealth_at_last_rebalance - 1.0;
            intensity_used.row(k) = in.intensity.row(static_cast<Index>(next));
            rep.rebalance_dates.push_back(in.dates[static_cast<std::size_t>(t)]);
            rep.rebalance_rows.push_back(t);
            wealth_at_last_rebalance = wealth;
            drift = x;
            previous = x;
            ++next;
        }
        if (t > t0) {
            net.push_back(wealth / day_start - 1.0);
            rep.return_dates.push_back(in.dates[static_cast<std::size_t>(t)]);
        }
        if (!(wealth > 0.0) || !std::isfinite(wealth)) throw NumericalError("backtest: wealth left the positive reals");
        wealth_path.push_back(wealth);
    }
    rep.net_returns = Eigen::Map<const Vector>(net.data(), static_cast<Index>(net.size()));
    rep.wealth = Eigen::Map<const Vector>(wealth_path.data(), static_cast<Index>(wealth_path.size()));

    const IntensityMetrics im = intensity_metrics(rep.weights, intensity_used, rep.period_returns);
    rep.intensity_path = im.intensity_path;
    rep.yield_path = im.yield_path;
    rep.average_intensity = im.average_intensity;
    if (rep.net_returns.size() >= 2) rep.metrics = performance_metrics(rep.net_returns, cfg.annualization);
    else rep.warnings.push_back("fewer than 2 daily returns: metrics not computed");
    return rep;
}

} // namespace eapo
