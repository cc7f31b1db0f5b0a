#pragma once

// Empirical CVaR (Rockafellar-Uryasev), the robust CVaR portfolio program, and
// phi-divergence distributionally robust means over an empirical measure.
//
// Sign convention for the DRO routines: the sample is a payoff (larger is
// better) and the ball's worst case is the smallest reweighted mean, so the
// robust value never exceeds the empirical mean and is nonincreasing in rho.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "eapo/solver.hpp"
#include "eapo/types.hpp"

namespace eapo {

// ---------------------------------------------------------------------------
// CVaR
// ---------------------------------------------------------------------------

struct ScenarioSet {
    Matrix scenarios; // M x n emissions-adjusted gross returns, uniform weights

    ScenarioSet() = default;
    explicit ScenarioSet(Matrix s) : scenarios(std::move(s)) { validate(); }

    Index size() const noexcept { return scenarios.rows(); }
    Index assets() const noexcept { return scenarios.cols(); }

    void validate() const {
        if (scenarios.rows() < 1) throw InvalidInput("ScenarioSet: need M >= 1 scenarios");
        if (!scenarios.allFinite()) throw InvalidInput("ScenarioSet: non-finite scenario returns");
    }
};

namespace detail {

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("cvar: alpha must lie in (0, 1)");
}

} // namespace detail

/// Rockafellar-Uryasev value min_nu { nu + sum_s (l_s - nu)_+ / ((1 - alpha) M) }.
/// The objective is piecewise linear in nu with breakpoints at the losses, so
/// it is minimized exactly by evaluating every breakpoint.
inline double rockafellar_uryasev(const Eigen::Ref<const Vector>& losses, double alpha, double nu) {
    detail::check_alpha(alpha);
    const double a = (1.0 - alpha) * static_cast<double>(losses.size());
    return nu + (losses.array() - nu).cwiseMax(0.0).sum() / a;
}

inline double cvar_empirical(const Eigen::Ref<const Vector>& losses, double alpha) {
    detail::check_alpha(alpha);
    const Index M = losses.size();
    if (M < 1) throw InvalidInput("cvar_empirical: empty loss vector");
    if (!losses.allFinite()) throw InvalidInput("cvar_empirical: non-finite losses");

    std::vector<double> d(losses.data(), losses.data() + M);
    std::sort(d.begin(), d.end(), std::greater<>());
    const double a = (1.0 - alpha) * static_cast<double>(M);
    double best = std::numeric_limits<double>::infinity();
    double prefix = 0.0; // sum of the k losses above d[k]
    for (Index k = 0; k < M; ++k) {
        const double nu = d[k];
        const double value = nu + (prefix - static_cast<double>(k) * nu) / a;
        best = std::min(best, value);
        prefix += d[k];
    }
    return best;
}

/// Tail weights w_s >= 0 (summing to 1) such that CVaR = sum_s w_s l_s; the
/// boundary scenario gets the fractional remainder. Ties are broken by index.
inline Vector cvar_tail_weights(const Eigen::Ref<const Vector>& losses, double alpha) {
    detail::check_alpha(alpha);
    const Index M = losses.size();
    if (M < 1) throw InvalidInput("cvar_tail_weights: empty loss vector");
    std::vector<Index> order(static_cast<std::size_t>(M));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return losses[i] > losses[j]; });
    const double a = (1.0 - alpha) * static_cast<double>(M);
    Vector w = Vector::Zero(M);
    double remaining = a;
    for (Index k = 0; k < M && remaining > 0.0; ++k) {
        const double take = std::min(1.0, remaining);
        w[order[static_cast<std::size_t>(k)]] = take / a;
        remaining -= take;
    }
    return w;
}

/// Objective x'mu_e - Gamma * ||diag(L) x||_q - beta * CVaR_alpha(-x'R).
inline double robust_cvar_objective(const Eigen::Ref<const Vector>& x, const ScenarioSet& scen, double alpha,
                                    double beta, const Eigen::Ref<const Vector>& mu_e,
                                    const Eigen::Ref<const Vector>& L, const SolverConfig& cfg) {
    double value = x.dot(mu_e) - cfg.gamma * ambiguity_norm(x, L, cfg);
    if (beta != 0.0) value -= beta * cvar_empirical(-(scen.scenarios * x), alpha);
    return value;
}

/// Projected subgradient ascent with diminishing steps eta0 / sqrt(k). The best
/// iterate is tracked, and the method restarts from it with a halved base step
/// until the best value stops improving. beta = 0 dispatches to the smooth
/// solver with theta = 0.
inline SolveResult solve_robust_cvar(const ScenarioSet& scen, double alpha, double beta,
                                     const Eigen::Ref<const Vector>& mu_e, const Eigen::Ref<const Vector>& L,
                                     const SolverConfig& cfg) {
    cfg.validate();
    scen.validate();
    detail::check_alpha(alpha);
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("solve_robust_cvar: beta must be finite and >= 0");
    const Index n = mu_e.size();
    detail::require_shape(scen.assets() == n, "solve_robust_cvar: scenario columns differ from mu_e length");
    if (!cfg.absorb_lipschitz) detail::require_shape(L.size() == n, "solve_robust_cvar: L must have length n");

    if (beta == 0.0) {
        SolverConfig mv = cfg;
        mv.theta = 0.0;
        return solve_robust_mv(mu_e, Matrix::Zero(n, n), L, mv);
    }

    auto f = [&](const Vector& x) { return robust_cvar_objective(x, scen, alpha, beta, mu_e, L, cfg); };
    auto subgrad = [&](const Vector& x) {
        Vector g = mu_e;
        if (cfg.gamma > 0.0) {
            SolverConfig no_risk = cfg;
            no_risk.theta = 0.0;
            g = gradient(x, mu_e, Matrix::Zero(n, n), L, no_risk);
        }
        const Vector losses = -(scen.scenarios * x);
        const Vector w = cvar_tail_weights(losses, alpha);
        g += beta * (scen.scenarios.transpose() * w); // -beta * d/dx CVaR(-x'R)
        return g;
    };

    Vector best = equal_weights(n);
    double best_f = f(best);
    double scale = std::max({mu_e.cwiseAbs().maxCoeff(), beta * scen.scenarios.cwiseAbs().maxCoeff(),
                             cfg.gamma * (cfg.absorb_lipschitz ? 1.0 : L.cwiseAbs().maxCoeff()), 1e-12});
    double eta0 = cfg.eta > 0.0 ? cfg.eta : 1.0 / scale;
    const int per_phase = std::max(1, cfg.max_iters / 10);
    int total = 0;
    SolveResult res;
    for (int phase = 0; phase < 40 && total < 10 * cfg.max_iters; ++phase) {
        Vector x = best;
        const double start_f = best_f;
        for (int k = 1; k <= per_phase; ++k) {
            ++total;
            const Vector g = subgrad(x);
            if (!g.allFinite()) throw NumericalError("solve_robust_cvar: non-finite subgradient");
            x = project_simplex(x + (eta0 / std::sqrt(static_cast<double>(k))) * g);
            const double fx = f(x);
            if (fx > best_f) {
                best_f = fx;
                best = x;
            }
            if (cfg.record_trace) res.diagnostics.objective_trace.push_back(best_f);
        }
        eta0 *= 0.5;
        if (best_f - start_f <= cfg.tol * std::max(1.0, std::abs(best_f)) && eta0 * scale < 1e-9) break;
    }
    res.weights = best;
    res.diagnostics.iterations = total;
    res.diagnostics.objective_value = best_f;
    res.diagnostics.converged = true;
    if (!std::isfinite(best_f)) throw NumericalError("solve_robust_cvar: non-finite objective");
    return res;
}

// ---------------------------------------------------------------------------
// phi-divergence DRO
// ---------------------------------------------------------------------------

enum class DivergenceFamily { kl, chi2 };

struct DivergenceBall {
    DivergenceFamily family = DivergenceFamily::kl;
    double rho = 0.0;
    Vector support; // payoff sample, uniform weights

    void validate() const {
        if (!(rho >= 0.0) || !std::isfinite(rho)) throw InvalidInput("DivergenceBall: rho must be finite and >= 0");
        if (support.size() < 1) throw InvalidInput("DivergenceBall: empty support");
        if (!support.allFinite()) throw InvalidInput("DivergenceBall: non-finite support");
        if (family != DivergenceFamily::kl && family != DivergenceFamily::chi2)
            throw ConfigError("DivergenceBall: unsupported divergence family");
    }
};

/// Loss sample l_m = sum_i x_i (gamma_i + delta_i z_m) for a scalar factor z.
inline Vector linear_loss_sample(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& gamma,
                                 const Eigen::Ref<const Vector>& delta, const Eigen::Ref<const Vector>& z) {
    detail::require_shape(x.size() == gamma.size() && x.size() == delta.size(),
                          "linear_loss_sample: x, gamma and delta differ in length");
    return Vector::Constant(z.size(), x.dot(gamma)) + x.dot(delta) * z;
}

/// phi(u): KL u log u - u + 1, chi-square (u - 1)^2.
inline double phi_divergence(DivergenceFamily family, double u) {
    switch (family) {
    case DivergenceFamily::kl: return u > 0.0 ? u * std::log(u) - u + 1.0 : 1.0;
    case DivergenceFamily::chi2: return (u - 1.0) * (u - 1.0);
    }
    throw ConfigError("unsupported divergence family");
}

/// Convex conjugate phi*(y): KL e^y - 1, chi-square y + y^2/4 for y >= -2 and -1 below.
inline double phi_conjugate(DivergenceFamily family, double y) {
    switch (family) {
    case DivergenceFamily::kl: return std::expm1(y);
    case DivergenceFamily::chi2: return y >= -2.0 ? y + 0.25 * y * y : -1.0;
    }
    throw ConfigError("unsupported divergence family");
}

inline constexpr double kMinDualEta = 1e-12;

namespace detail {

/// -eta log mean exp(-l / eta), evaluated with a shifted exponent.
inline double kl_soft_min(const Eigen::Ref<const Vector>& l, double eta) {
    const double lo = l.minCoeff();
    const double s = (-(l.array() - lo) / eta).exp().mean();
    return lo - eta * std::log(s);
}

/// Inner supremum over nu of the dual objective at fixed eta.
inline double dro_inner(const DivergenceBall& ball, double eta) {
    const Vector& l = ball.support;
    if (ball.family == DivergenceFamily::kl) return kl_soft_min(l, eta) - ball.rho * eta;
    auto g = [&](double nu) {
        double acc = 0.0;
        for (Index m = 0; m < l.size(); ++m) acc += phi_conjugate(ball.family, (nu - l[m]) / eta);
        return nu - ball.rho * eta - eta * acc / static_cast<double>(l.size());
    };
    const double lo = l.minCoeff();
    const double hi = l.maxCoeff();
    return golden_max(g, lo, hi, 1e-14 * std::max(1.0, hi - lo)).second;
}

} // namespace detail

/// Worst-case mean inf { E_Q[l] : D_phi(Q || P_hat) <= rho } through the dual
/// sup_{eta >= 0, nu} { nu - rho eta - eta mean phi*((nu - l) / eta) }.
/// The outer search scans a log grid in eta and refines the best bracket by
/// golden section in log eta.
inline double dro_dual_value(const DivergenceBall& ball) {
    ball.validate();
    const Vector& l = ball.support;
    const double mean = l.mean();
    if (ball.rho == 0.0) return mean;
    const double lo = l.minCoeff();
    const double hi = l.maxCoeff();
    if (lo == hi) return lo;

    const double spread = hi - lo;
    const double log_lo = std::log(std::max(kMinDualEta, 1e-10 * spread));
    const double log_hi = std::log(1e8 * spread / std::max(ball.rho, 1e-300) + 1e8 * spread);
    auto value = [&](double log_eta) { return detail::dro_inner(ball, std::exp(log_eta)); };

    const int grid = 200;
    double best_t = log_lo;
    double best_v = -std::numeric_limits<double>::infinity();
    int best_k = 0;
    for (int k = 0; k <= grid; ++k) {
        const double t = log_lo + (log_hi - log_lo) * k / grid;
        const double v = value(t);
        if (v > best_v) {
            best_v = v;
            best_t = t;
            best_k = k;
        }
    }
    const double step = (log_hi - log_lo) / grid;
    const double a = log_lo + step * std::max(0, best_k - 1);
    const double b = log_lo + step * std::min(grid, best_k + 1);
    const auto [t_star, v_star] = detail::golden_max(value, a, b, 1e-13);
    (void)t_star;
    (void)best_t;
    // Clamp to the feasible range [min l, mean]: the worst-case mean is a
    // reweighting of the sample and cannot exceed the unperturbed mean.
    return std::clamp(std::max(best_v, v_star), lo, mean);
}

namespace detail {

/// Bisection for the root of a decreasing function on [lo, hi].
template <typename F>
double bisect_decreasing(F&& f, double target, double lo, double hi, int iters = 300) {
    for (int i = 0; i < iters; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (f(mid) > target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline Vector kl_tilt(const Eigen::Ref<const Vector>& l, double eta) {
    const double lo = l.minCoeff();
    Vector w = (-(l.array() - lo) / eta).exp().matrix();
    return w * (static_cast<double>(l.size()) / w.sum());
}

inline Vector chi2_tilt(const Eigen::Ref<const Vector>& l, double eta) {
    // w = (1 + (nu - l) / (2 eta))_+ with nu chosen so that mean w = 1.
    auto mean_w = [&](double nu) { return (1.0 + (nu - l.array()) / (2.0 * eta)).cwiseMax(0.0).mean(); };
    const double lo = l.minCoeff() - 2.0 * eta;
    const double hi = l.maxCoeff();
    double a = lo, b = hi;
    for (int i = 0; i < 300; ++i) {
        const double mid = 0.5 * (a + b);
        if (mid <= a || mid >= b) break;
        if (mean_w(mid) < 1.0) a = mid;
        else b = mid;
    }
    const double nu = 0.5 * (a + b);
    Vector w = (1.0 + (nu - l.array()) / (2.0 * eta)).cwiseMax(0.0).matrix();
    return w * (static_cast<double>(l.size()) / w.sum());
}

inline double mean_divergence(DivergenceFamily family, const Eigen::Ref<const Vector>& w) {
    double acc = 0.0;
    for (Index m = 0; m < w.size(); ++m) acc += phi_divergence(family, w[m]);
    return acc / static_cast<double>(w.size());
}

} // namespace detail

/// Primal worst-case mean over likelihood ratios w >= 0, mean w = 1,
/// mean phi(w) <= rho. The minimizer is a tilt of the uniform weights indexed
/// by a scalar temperature (KL: w ~ exp(-l / eta); chi-square: w = (1 + (nu - l)/(2 eta))_+),
/// and the temperature is bisected until the divergence constraint is active.
/// Test oracle only; M <= 30.
inline double dro_primal_oracle(const DivergenceBall& ball) {
    ball.validate();
    const Vector& l = ball.support;
    const Index M = l.size();
    if (M > 30) throw InvalidInput("dro_primal_oracle: support limited to 30 points");
    const double mean = l.mean();
    if (ball.rho == 0.0) return mean;
    const double lo = l.minCoeff();
    const double hi = l.maxCoeff();
    if (lo == hi) return lo;

    const double count_min = static_cast<double>((l.array() == lo).count());
    const double m = static_cast<double>(M);
    const double cap = ball.family == DivergenceFamily::kl ? std::log(m / count_min) : m / count_min - 1.0;
    if (ball.rho >= cap) return lo;

    const double spread = hi - lo;
    auto tilt = [&](double eta) {
        return ball.family == DivergenceFamily::kl ? detail::kl_tilt(l, eta) : detail::chi2_tilt(l, eta);
    };
    auto divergence_at = [&](double log_eta) {
        return detail::mean_divergence(ball.family, tilt(std::exp(log_eta)));
    };
    const double log_eta = detail::bisect_decreasing(divergence_at, ball.rho, std::log(1e-14 * spread),
                                                     std::log(1e14 * spread));
    const Vector w = tilt(std::exp(log_eta));
    return w.dot(l) / m;
}

} // namespace eapo
