#pragma once

// Return-emissions Pareto frontier of the scalarized problem
// max_x x'r - mu x'lambda, Gamma sensitivity curves, and a tiny robust
// Bellman recursion with a flat max-min enumeration for cross-checks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "eapo/penalty.hpp"
#include "eapo/solver.hpp"
#include "eapo/types.hpp"

namespace eapo {

struct FrontierPoint {
    double mu_weight = 0.0;
    WeightVector weights;
    double mean_return = 0.0;
    double intensity = 0.0;
    double value = 0.0; // mean_return - mu_weight * intensity
};

namespace detail {

inline void check_mu_grid(const Eigen::Ref<const Vector>& mu_grid) {
    if (mu_grid.size() == 0) throw InvalidInput("pareto_sweep: empty mu grid");
    for (Index k = 0; k < mu_grid.size(); ++k) {
        if (!std::isfinite(mu_grid[k]) || mu_grid[k] < 0.0)
            throw InvalidInput("pareto_sweep: mu grid must be finite and >= 0");
        if (k > 0 && mu_grid[k] < mu_grid[k - 1]) throw InvalidInput("pareto_sweep: mu grid must be ascending");
    }
}

} // namespace detail

/// Vertex solution e_k with k = argmax_i (r_i - mu lambda_i), lowest index on ties.
inline std::vector<FrontierPoint> pareto_sweep(const Eigen::Ref<const Vector>& r, const IntensityVector& lambda,
                                               const Eigen::Ref<const Vector>& mu_grid) {
    const Index n = r.size();
    if (n == 0) throw InvalidInput("pareto_sweep: empty universe");
    detail::require_shape(lambda.size() == n, "pareto_sweep: r and lambda differ in length");
    if (!r.allFinite()) throw InvalidInput("pareto_sweep: non-finite returns");
    detail::check_mu_grid(mu_grid);

    std::vector<FrontierPoint> out;
    out.reserve(static_cast<std::size_t>(mu_grid.size()));
    for (Index k = 0; k < mu_grid.size(); ++k) {
        const double mu = mu_grid[k];
        Index best = 0;
        double best_v = r[0] - mu * lambda[0];
        for (Index i = 1; i < n; ++i) {
            const double v = r[i] - mu * lambda[i];
            if (v > best_v) {
                best_v = v;
                best = i;
            }
        }
        FrontierPoint p;
        p.mu_weight = mu;
        p.weights = Vector::Zero(n);
        p.weights[best] = 1.0;
        p.mean_return = r[best];
        p.intensity = lambda[best];
        p.value = best_v;
        out.push_back(std::move(p));
    }
    return out;
}

/// Empirical frontier: per mu, solves the full robust objective with the
/// extra term -mu x'lambda folded into the mean.
inline std::vector<FrontierPoint> pareto_sweep_regularized(const Eigen::Ref<const Vector>& r,
                                                           const Eigen::Ref<const Vector>& mu_e,
                                                           const Eigen::Ref<const Matrix>& sigma,
                                                           const Eigen::Ref<const Vector>& L,
                                                           const IntensityVector& lambda, const SolverConfig& cfg,
                                                           const Eigen::Ref<const Vector>& mu_grid) {
    const Index n = r.size();
    detail::require_shape(lambda.size() == n && mu_e.size() == n, "pareto_sweep_regularized: length mismatch");
    detail::check_mu_grid(mu_grid);
    std::vector<FrontierPoint> out;
    Vector warm = equal_weights(n);
    for (Index k = 0; k < mu_grid.size(); ++k) {
        const double mu = mu_grid[k];
        const Vector shifted = mu_e - mu * lambda.values();
        SolverConfig c = cfg;
        c.turnover_cap.reset();
        const SolveResult res = solve_robust_mv(shifted, sigma, L, c, warm);
        warm = res.weights;
        FrontierPoint p;
        p.mu_weight = mu;
        p.weights = res.weights;
        p.mean_return = res.weights.dot(r);
        p.intensity = res.weights.dot(lambda.values());
        p.value = p.mean_return - mu * p.intensity;
        out.push_back(std::move(p));
    }
    return out;
}

struct FrontierReport {
    std::vector<Index> convexity_violations; // middle index of the offending triple
    std::vector<Index> slope_violations;
    std::vector<Index> monotonicity_violations;
    std::vector<Index> skipped_kinks;
    Index slopes_checked = 0;

    bool ok() const {
        return convexity_violations.empty() && slope_violations.empty() && monotonicity_violations.empty();
    }
};

/// Checks on consecutive points: (i) g convex by the chord inequality,
/// (ii) central-difference slope of g within `rel_tol` of -lambda_bar where
/// the neighbors share the same intensity (no kink inside the stencil),
/// (iii) lambda_bar nonincreasing in mu.
inline FrontierReport frontier_diagnostics(const std::vector<FrontierPoint>& points, double rel_tol = 0.02) {
    FrontierReport rep;
    if (points.size() < 3) throw InvalidInput("frontier_diagnostics: need >= 3 points");
    double scale = 0.0;
    for (const auto& p : points) scale = std::max({scale, std::abs(p.value), std::abs(p.mean_return)});
    const double abs_tol = 1e-12 * std::max(1.0, scale);

    for (std::size_t i = 1; i < points.size(); ++i) {
        const double tol = 1e-12 * std::max(1.0, std::abs(points[i - 1].intensity));
        if (points[i].intensity > points[i - 1].intensity + tol)
            rep.monotonicity_violations.push_back(static_cast<Index>(i));
    }
    for (std::size_t i = 1; i + 1 < points.size(); ++i) {
        const auto& a = points[i - 1];
        const auto& b = points[i];
        const auto& c = points[i + 1];
        const double span = c.mu_weight - a.mu_weight;
        if (!(span > 0.0)) continue;
        const double w = (b.mu_weight - a.mu_weight) / span;
        const double chord = (1.0 - w) * a.value + w * c.value;
        if (b.value > chord + abs_tol) rep.convexity_violations.push_back(static_cast<Index>(i));

        const double lam_tol = 1e-12 * std::max(1.0, std::abs(b.intensity));
        if (std::abs(a.intensity - c.intensity) > rel_tol * std::max(std::abs(b.intensity), lam_tol) ||
            std::abs(a.intensity - b.intensity) > rel_tol * std::max(std::abs(b.intensity), lam_tol)) {
            rep.skipped_kinks.push_back(static_cast<Index>(i));
            continue;
        }
        ++rep.slopes_checked;
        const double slope = (c.value - a.value) / span;
        if (std::abs(slope + b.intensity) > rel_tol * std::abs(b.intensity) + abs_tol / span)
            rep.slope_violations.push_back(static_cast<Index>(i));
    }
    return rep;
}

/// V*(Gamma) for each Gamma on an ascending grid.
inline Vector value_curve_gamma(const Eigen::Ref<const Vector>& mu_e, const Eigen::Ref<const Matrix>& sigma,
                                const Eigen::Ref<const Vector>& L, const SolverConfig& cfg,
                                const Eigen::Ref<const Vector>& gamma_grid) {
    if (gamma_grid.size() == 0) throw InvalidInput("value_curve_gamma: empty grid");
    Vector out(gamma_grid.size());
    for (Index k = 0; k < gamma_grid.size(); ++k) {
        if (!(gamma_grid[k] >= 0.0)) throw InvalidInput("value_curve_gamma: Gamma must be >= 0");
        if (k > 0 && gamma_grid[k] < gamma_grid[k - 1]) throw InvalidInput("value_curve_gamma: grid must be ascending");
        SolverConfig c = cfg;
        c.gamma = gamma_grid[k];
        out[k] = optimal_value(mu_e, sigma, L, c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tiny robust dynamic program
// ---------------------------------------------------------------------------

/// Periods t = 0..horizon with payoffs R_t(z) = gamma_t + Delta_t z over a
/// finite disturbance set Z_t.
struct TinyDynamicSpec {
    int horizon = 0;
    Index n = 2;
    std::vector<Vector> gammas;                // horizon + 1 vectors of length n
    std::vector<Matrix> deltas;                // horizon + 1 matrices, n x d_t
    std::vector<std::vector<Vector>> z_sets;   // horizon + 1 nonempty sets of d_t-vectors
    double beta = 1.0;
    double grid_step = 0.1;

    void validate() const {
        if (horizon < 0 || horizon > 3) throw ConfigError("TinyDynamicSpec: horizon must lie in [0, 3]");
        if (n < 1 || n > 3) throw ConfigError("TinyDynamicSpec: n must lie in [1, 3]");
        const auto periods = static_cast<std::size_t>(horizon + 1);
        if (gammas.size() != periods || deltas.size() != periods || z_sets.size() != periods)
            throw ShapeError("TinyDynamicSpec: need horizon + 1 payoff bases, loadings and disturbance sets");
        for (std::size_t t = 0; t < periods; ++t) {
            detail::require_shape(gammas[t].size() == n && deltas[t].rows() == n,
                                  "TinyDynamicSpec: payoff dimensions differ from n");
            if (z_sets[t].empty()) throw InvalidInput("TinyDynamicSpec: empty disturbance set");
            for (const auto& z : z_sets[t]) {
                detail::require_shape(z.size() == deltas[t].cols(), "TinyDynamicSpec: disturbance dimension mismatch");
                if (!z.allFinite()) throw InvalidInput("TinyDynamicSpec: non-finite disturbance");
            }
        }
        if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("TinyDynamicSpec: discount must lie in [0, 1]");
        bool allowed = false;
        for (double s : {0.05, 0.1, 0.2}) allowed = allowed || std::abs(grid_step - s) < 1e-12;
        if (!allowed) throw ConfigError("TinyDynamicSpec: grid step must be 0.05, 0.1 or 0.2");
    }

    int grid_divisions() const { return static_cast<int>(std::lround(1.0 / grid_step)); }
};

inline constexpr double kMaxTinyGridPoints = 1e4;

/// Simplex grid with the configured step, in enumeration order.
inline std::vector<Vector> tiny_grid(const TinyDynamicSpec& spec) {
    const int k = spec.grid_divisions();
    // C(k + n - 1, n - 1) points
    double count = 1.0;
    for (Index j = 1; j < spec.n; ++j) count = count * static_cast<double>(k + j) / static_cast<double>(j);
    if (count > kMaxTinyGridPoints) throw ConfigError("bellman_tiny: grid exceeds 1e4 points, refusing");
    std::vector<Vector> pts;
    detail::for_each_grid_point(spec.n, k, [&](const Vector& x) { pts.push_back(x); });
    return pts;
}

/// Stage payoff x'(gamma_t + Delta_t z).
inline double tiny_stage_payoff(const TinyDynamicSpec& spec, int t, const Vector& x, const Vector& z) {
    const auto s = static_cast<std::size_t>(t);
    const Vector R = spec.gammas[s] + spec.deltas[s] * z;
    return x.dot(R);
}

/// Backward recursion V_t(x) = min_z x'R_t(z) + beta max_{x'} V_{t+1}(x'),
/// V_{horizon+1} = 0; returns max_x V_0(x). Pre-decision convention: the
/// period-t allocation is chosen before z_t is revealed.
inline double bellman_tiny(const TinyDynamicSpec& spec) {
    spec.validate();
    const std::vector<Vector> grid = tiny_grid(spec);
    double next_best = 0.0;
    for (int t = spec.horizon; t >= 0; --t) {
        double best = -std::numeric_limits<double>::infinity();
        for (const Vector& x : grid) {
            double worst = std::numeric_limits<double>::infinity();
            for (const Vector& z : spec.z_sets[static_cast<std::size_t>(t)])
                worst = std::min(worst, tiny_stage_payoff(spec, t, x, z));
            const double v = t == spec.horizon ? worst : worst + spec.beta * next_best;
            best = std::max(best, v);
        }
        next_best = best;
    }
    return next_best;
}

} // namespace eapo
