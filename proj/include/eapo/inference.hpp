#pragma once

// Newey-West HAC tests on return differentials and a circular block bootstrap
// for Sharpe-ratio differences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "eapo/types.hpp"

namespace eapo {

struct HacResult {
    double mean_diff = 0.0;
    double long_run_variance = 0.0;
    double standard_error = 0.0; // sqrt(long_run_variance / T)
    double t_stat = 0.0;         // mean_diff / standard_error
    double raw_t_stat = 0.0;     // mean_diff / sqrt(long_run_variance), no 1/T scaling
    int bandwidth = 0;
    Index observations = 0;
    bool floored = false;
    std::vector<std::string> warnings;
};

/// Sample autocovariance at lag l with 1/T normalization.
inline double autocovariance(const Eigen::Ref<const Vector>& d, Index lag) {
    const Index T = d.size();
    const double mean = d.mean();
    double acc = 0.0;
    for (Index t = lag; t < T; ++t) acc += (d[t] - mean) * (d[t - lag] - mean);
    return acc / static_cast<double>(T);
}

/// Long-run variance gamma_0 + 2 sum_{l=1}^{L} (1 - l/(L+1)) gamma_l, floored at 0.
/// When both the mean and the standard error are zero the t statistic is 0;
/// a nonzero mean over a zero standard error gives NaN.
inline HacResult newey_west(const Eigen::Ref<const Vector>& delta, int bandwidth) {
    const Index T = delta.size();
    if (bandwidth < 0) throw InvalidInput("newey_west: bandwidth must be >= 0");
    if (T <= bandwidth) throw InvalidInput("newey_west: need T > bandwidth (T = " + std::to_string(T) + ")");
    if (!delta.allFinite()) throw InvalidInput("newey_west: non-finite series");

    HacResult out;
    out.bandwidth = bandwidth;
    out.observations = T;
    out.mean_diff = delta.mean();
    double lrv = autocovariance(delta, 0);
    for (int l = 1; l <= bandwidth; ++l) {
        const double w = 1.0 - static_cast<double>(l) / static_cast<double>(bandwidth + 1);
        lrv += 2.0 * w * autocovariance(delta, l);
    }
    if (lrv < 0.0) {
        out.floored = true;
        out.warnings.push_back("negative long-run variance floored at 0");
        lrv = 0.0;
    }
    out.long_run_variance = lrv;
    out.standard_error = std::sqrt(lrv / static_cast<double>(T));
    if (out.standard_error > 0.0) {
        out.t_stat = out.mean_diff / out.standard_error;
        out.raw_t_stat = out.mean_diff / std::sqrt(lrv);
    } else {
        out.t_stat = out.mean_diff == 0.0 ? 0.0 : nan_value;
        out.raw_t_stat = out.t_stat;
    }
    return out;
}

/// HAC tests of A - B for every ordered pair of aligned return series.
inline std::vector<std::vector<HacResult>> pairwise_return_tests(const std::vector<Vector>& returns,
                                                                 int bandwidth = 20) {
    for (const auto& r : returns)
        if (r.size() != returns.front().size())
            throw ShapeError("pairwise_return_tests: return series are not aligned");
    std::vector<std::vector<HacResult>> out(returns.size(), std::vector<HacResult>(returns.size()));
    for (std::size_t a = 0; a < returns.size(); ++a)
        for (std::size_t b = 0; b < returns.size(); ++b)
            out[a][b] = newey_west(returns[a] - returns[b], bandwidth);
    return out;
}

// ---------------------------------------------------------------------------
// Sharpe ratio bootstrap
// ---------------------------------------------------------------------------

inline constexpr double kTradingDays = 252.0;

/// mean / sample std * sqrt(annualization); NaN when the std is zero.
inline double sharpe_ratio(const Eigen::Ref<const Vector>& r, double annualization = kTradingDays) {
    const Index T = r.size();
    if (T < 2) throw InsufficientData("sharpe_ratio: need >= 2 observations");
    const double mean = r.mean();
    const double var = (r.array() - mean).square().sum() / static_cast<double>(T - 1);
    if (!(var > 0.0)) return nan_value;
    return mean / std::sqrt(var) * std::sqrt(annualization);
}

/// Type-7 sample quantile (linear interpolation between order statistics).
inline double quantile_type7(std::vector<double> v, double p) {
    if (v.empty()) throw InvalidInput("quantile: empty sample");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct BootstrapResult {
    double sharpe_a = 0.0;
    double sharpe_b = 0.0;
    double diff = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int replications = 0;
    int block_length = 0;
    int redraws = 0;
    std::vector<double> replicates;
};

/// Circular block bootstrap of the paired series: blocks of `block_length`
/// consecutive days (wrapping at the end) are cut from both series at the same
/// indices. Replication r uses its own stream seeded with seed + r; a draw
/// with zero volatility in either series is redrawn from the same stream.
inline BootstrapResult block_bootstrap_sharpe(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                                              int block_length = 20, int replications = 2000,
                                              std::uint64_t seed = 0, double annualization = kTradingDays) {
    const Index T = a.size();
    if (b.size() != T) throw ShapeError("block_bootstrap_sharpe: series differ in length");
    if (block_length < 1) throw InvalidInput("block_bootstrap_sharpe: block length must be >= 1");
    if (replications < 1) throw InvalidInput("block_bootstrap_sharpe: need >= 1 replication");
    if (T < block_length || T < 2) throw InsufficientData("block_bootstrap_sharpe: series shorter than a block");
    if (!a.allFinite() || !b.allFinite()) throw InvalidInput("block_bootstrap_sharpe: non-finite returns");

    BootstrapResult out;
    out.replications = replications;
    out.block_length = block_length;
    out.sharpe_a = sharpe_ratio(a, annualization);
    out.sharpe_b = sharpe_ratio(b, annualization);
    out.diff = out.sharpe_a - out.sharpe_b;
    out.replicates.resize(static_cast<std::size_t>(replications));

    const Index blocks = (T + block_length - 1) / block_length;
    const long long redraw_cap = 10LL * replications;
    Vector ra(T), rb(T);
    for (int rep = 0; rep < replications; ++rep) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(rep));
        std::uniform_int_distribution<Index> start(0, T - 1);
        for (;;) {
            Index pos = 0;
            for (Index k = 0; k < blocks && pos < T; ++k) {
                const Index s = start(rng);
                for (Index j = 0; j < block_length && pos < T; ++j, ++pos) {
                    const Index src = (s + j) % T;
                    ra[pos] = a[src];
                    rb[pos] = b[src];
                }
            }
            const double sa = sharpe_ratio(ra, annualization);
            const double sb = sharpe_ratio(rb, annualization);
            if (std::isfinite(sa) && std::isfinite(sb)) {
                out.replicates[static_cast<std::size_t>(rep)] = sa - sb;
                break;
            }
            if (++out.redraws > redraw_cap)
                throw NumericalError("block_bootstrap_sharpe: too many zero-volatility replications");
        }
    }
    out.ci_low = quantile_type7(out.replicates, 0.025);
    out.ci_high = quantile_type7(out.replicates, 0.975);
    return out;
}

} // namespace eapo
