#pragma once

// Robust emissions-aware mean-variance program on the simplex
//
//   max_x  x'mu_e - Gamma * ||diag(L) x||_q - theta * x' Sigma x
//
// solved by projected gradient with backtracking, followed by an l1 turnover
// projection. In the default specialization diag(L) is absorbed into Gamma
// and the penalty is Gamma * ||x||_2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eapo/types.hpp"

namespace eapo {

struct SolverConfig {
    double gamma = 0.0;     // robustness budget
    double theta = 0.5;     // risk aversion
    int m = 1;              // penalty curvature (used when building mu_e and L)
    BallNorm p = BallNorm::l2;
    double eta = 0.0;       // initial step; <= 0 selects 1 / (2 theta lambda_max(Sigma) + Gamma + 1)
    int max_iters = 5000;
    std::optional<double> turnover_cap;
    double tol = 1e-8;
    std::uint64_t seed = 0;
    bool absorb_lipschitz = true; // penalty Gamma * ||x||_2 instead of Gamma * ||diag(L) x||_q
    bool record_trace = false;

    void validate() const {
        if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("solver: gamma must be finite and >= 0");
        if (!(theta >= 0.0) || !std::isfinite(theta)) throw ConfigError("solver: theta must be finite and >= 0");
        if (m < 1) throw ConfigError("solver: curvature m must be >= 1");
        if (!std::isfinite(eta)) throw ConfigError("solver: eta must be finite");
        if (max_iters < 1) throw ConfigError("solver: max_iters must be >= 1");
        if (!(tol > 0.0)) throw ConfigError("solver: tol must be > 0");
        if (turnover_cap && !(*turnover_cap >= 0.0 && *turnover_cap <= 2.0))
            throw ConfigError("solver: turnover cap must lie in [0, 2]");
    }
};

struct SolveDiagnostics {
    int iterations = 0;
    double final_projected_gradient_norm = 0.0;
    double objective_value = 0.0;
    bool converged = false;
    bool turnover_binding = false;
    bool turnover_converged = true;
    std::vector<double> objective_trace; // accepted-step objective values when requested
};

struct SolveResult {
    WeightVector weights;
    SolveDiagnostics diagnostics;
};

// ---------------------------------------------------------------------------
// Objective and gradient
// ---------------------------------------------------------------------------

/// The ambiguity term without Gamma: ||x||_2 when absorbed, else ||diag(L) x||_q.
inline double ambiguity_norm(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& L,
                             const SolverConfig& cfg) {
    if (cfg.absorb_lipschitz) return x.norm();
    detail::require_shape(L.size() == x.size(), "ambiguity_norm: L and x differ in length");
    return norm_of(Vector(L.cwiseProduct(x)), dual_of(cfg.p));
}

namespace detail {

inline void check_problem(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& mu,
                          const Eigen::Ref<const Matrix>& sigma) {
    require_shape(mu.size() == x.size(), "solver: mu_e and x differ in length");
    require_shape(sigma.rows() == x.size() && sigma.cols() == x.size(), "solver: Sigma must be n x n");
}

} // namespace detail

inline double objective(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& mu_e,
                        const Eigen::Ref<const Matrix>& sigma, const Eigen::Ref<const Vector>& L,
                        const SolverConfig& cfg) {
    detail::check_problem(x, mu_e, sigma);
    return x.dot(mu_e) - cfg.gamma * ambiguity_norm(x, L, cfg) - cfg.theta * x.dot(sigma * x);
}

/// Gradient of the absorbed-l2 objective: mu_e - Gamma x / ||x||_2 - 2 theta Sigma x.
inline Vector gradient(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& mu_e,
                       const Eigen::Ref<const Matrix>& sigma, const SolverConfig& cfg) {
    detail::check_problem(x, mu_e, sigma);
    const double nrm = x.norm();
    if (!(nrm > 0.0)) throw InvalidInput("gradient: x must be nonzero");
    return mu_e - cfg.gamma * x / nrm - 2.0 * cfg.theta * (sigma * x);
}

/// (Sub)gradient of the general objective. For q = inf the subgradient of
/// max_i L_i |x_i| uses the lowest-index maximizer.
inline Vector gradient(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& mu_e,
                       const Eigen::Ref<const Matrix>& sigma, const Eigen::Ref<const Vector>& L,
                       const SolverConfig& cfg) {
    if (cfg.absorb_lipschitz) return gradient(x, mu_e, sigma, cfg);
    detail::check_problem(x, mu_e, sigma);
    detail::require_shape(L.size() == x.size(), "gradient: L and x differ in length");
    Vector g = mu_e - 2.0 * cfg.theta * (sigma * x);
    const Vector lx = L.cwiseProduct(x);
    switch (dual_of(cfg.p)) {
    case BallNorm::l2: {
        const double nrm = lx.norm();
        if (nrm > 0.0) g -= cfg.gamma * L.cwiseProduct(lx) / nrm;
        break;
    }
    case BallNorm::l1:
        for (Index i = 0; i < x.size(); ++i) {
            const double s = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 1.0);
            g[i] -= cfg.gamma * L[i] * s;
        }
        break;
    case BallNorm::linf: {
        Index k = 0;
        double best = -1.0;
        for (Index i = 0; i < x.size(); ++i)
            if (std::abs(lx[i]) > best) {
                best = std::abs(lx[i]);
                k = i;
            }
        g[k] -= cfg.gamma * L[k] * (x[k] >= 0.0 ? 1.0 : -1.0);
        break;
    }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

/// Euclidean projection onto the unit simplex (sort and threshold).
inline WeightVector project_simplex(const Eigen::Ref<const Vector>& v) {
    const Index n = v.size();
    if (n == 0) throw InvalidInput("project_simplex: empty vector");
    if (!v.allFinite()) throw InvalidInput("project_simplex: non-finite input");
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double tau = 0.0;
    for (Index k = 0; k < n; ++k) {
        cumsum += u[static_cast<std::size_t>(k)];
        const double t = (cumsum - 1.0) / static_cast<double>(k + 1);
        if (u[static_cast<std::size_t>(k)] - t > 0.0) tau = t;
    }
    WeightVector x = (v.array() - tau).cwiseMax(0.0);
    // Restore the unit sum lost to rounding; the mass goes to the support.
    const double s = x.sum();
    if (s > 0.0 && s != 1.0) x /= s;
    return x;
}

/// Projection onto {x in simplex : x_i <= cap_i}. Infinite caps are allowed.
inline WeightVector project_capped_simplex(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& cap) {
    const Index n = v.size();
    detail::require_shape(cap.size() == n, "project_capped_simplex: cap length mismatch");
    double cap_total = 0.0;
    for (Index i = 0; i < n; ++i) cap_total += std::min(cap[i], 1.0);
    if (cap_total < 1.0 - 1e-12) throw InvalidInput("project_capped_simplex: caps admit no feasible point");
    auto mass = [&](double tau) {
        double s = 0.0;
        for (Index i = 0; i < n; ++i) s += std::clamp(v[i] - tau, 0.0, cap[i]);
        return s;
    };
    double lo = v.minCoeff() - 1.0;
    double hi = v.maxCoeff();
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (mass(mid) > 1.0 ? lo : hi) = mid;
    }
    // Exact threshold from the active sets at the bisection point.
    const double tau0 = 0.5 * (lo + hi);
    double fixed = 0.0;
    double free_sum = 0.0;
    Index free_count = 0;
    for (Index i = 0; i < n; ++i) {
        const double z = v[i] - tau0;
        if (z >= cap[i]) fixed += cap[i];
        else if (z > 0.0) {
            free_sum += v[i];
            ++free_count;
        }
    }
    const double tau = free_count > 0 ? (free_sum + fixed - 1.0) / static_cast<double>(free_count) : tau0;
    WeightVector x(n);
    for (Index i = 0; i < n; ++i) x[i] = std::clamp(v[i] - tau, 0.0, cap[i]);
    return x;
}

/// Projection onto the l1 ball {y : ||y - center||_1 <= radius}.
inline Vector project_l1_ball(const Eigen::Ref<const Vector>& z, const Eigen::Ref<const Vector>& center, double radius) {
    const Vector d = z - center;
    if (d.lpNorm<1>() <= radius) return z;
    if (radius <= 0.0) return center;
    const Vector w = radius * project_simplex(d.cwiseAbs() / radius);
    return center + d.cwiseSign().cwiseProduct(w);
}

struct TurnoverProjection {
    WeightVector weights;
    bool converged = true;
    int rounds = 0;
};

/// Projection of x onto {y in simplex : ||y - x_prev||_1 <= tau} by Dykstra's
/// alternating projections (at most 1000 rounds, stop when iterates move < 1e-10).
inline TurnoverProjection project_turnover(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x_prev,
                                           double tau) {
    detail::require_shape(x.size() == x_prev.size(), "project_turnover: x and x_prev differ in length");
    if (!(tau >= 0.0)) throw InvalidInput("project_turnover: tau must be >= 0");
    TurnoverProjection out;
    if ((x - x_prev).lpNorm<1>() <= tau) {
        out.weights = x;
        return out;
    }
    if (tau == 0.0) {
        out.weights = x_prev;
        return out;
    }
    const Index n = x.size();
    Vector y = x;
    Vector p = Vector::Zero(n);
    Vector q = Vector::Zero(n);
    Vector a = x;
    out.converged = false;
    for (int k = 1; k <= 1000; ++k) {
        const Vector a_next = project_simplex(y + p);
        p = y + p - a_next;
        const Vector b = project_l1_ball(a_next + q, x_prev, tau);
        q = a_next + q - b;
        const double move = std::max((b - y).norm(), (a_next - a).norm());
        y = b;
        a = a_next;
        out.rounds = k;
        if (move < 1e-10) {
            out.converged = true;
            break;
        }
    }
    out.weights = a;
    return out;
}

// ---------------------------------------------------------------------------
// Projected-gradient solver
// ---------------------------------------------------------------------------

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
inline double max_eigenvalue_estimate(const Eigen::Ref<const Matrix>& sigma, int iters = 50) {
    const Index n = sigma.rows();
    if (n == 0) return 0.0;
    Vector v = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    double lambda = 0.0;
    for (int i = 0; i < iters; ++i) {
        const Vector w = sigma * v;
        const double nrm = w.norm();
        if (nrm == 0.0) return 0.0;
        lambda = v.dot(w);
        v = w / nrm;
    }
    return std::max(lambda, (sigma * v).norm());
}

inline double default_step(const Eigen::Ref<const Matrix>& sigma, const SolverConfig& cfg) {
    if (cfg.eta > 0.0) return cfg.eta;
    return 1.0 / (2.0 * cfg.theta * max_eigenvalue_estimate(sigma) + cfg.gamma + 1.0);
}

namespace detail {

/// Newton step on the face {y : y_i = 0 off `support`, sum y = sum x} with a
/// central-difference Hessian of `grad`. Empty when the reduced system is
/// singular or the step leaves the nonnegative orthant.
template <typename Gradient>
std::optional<Vector> face_newton_step(Gradient&& grad, const Vector& x, const Vector& g,
                                       const std::vector<Index>& support) {
    const auto k = static_cast<Index>(support.size());
    if (k < 2) return std::nullopt;
    Matrix kkt = Matrix::Zero(k + 1, k + 1);
    const double h = 1e-7;
    for (Index b = 0; b < k; ++b) {
        Vector up = x, dn = x;
        up[support[static_cast<std::size_t>(b)]] += h;
        dn[support[static_cast<std::size_t>(b)]] -= h;
        const Vector dg = (grad(up) - grad(dn)) / (2.0 * h);
        for (Index a = 0; a < k; ++a) kkt(a, b) = dg[support[static_cast<std::size_t>(a)]];
    }
    kkt.topLeftCorner(k, k) = 0.5 * (kkt.topLeftCorner(k, k) + kkt.topLeftCorner(k, k).transpose()).eval();
    if (!kkt.allFinite()) return std::nullopt;
    kkt.block(0, k, k, 1).setOnes();
    kkt.block(k, 0, 1, k).setOnes();
    Vector rhs = Vector::Zero(k + 1);
    for (Index a = 0; a < k; ++a) rhs[a] = -g[support[static_cast<std::size_t>(a)]];
    const Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) return std::nullopt;
    const Vector sol = lu.solve(rhs);
    Vector y = x;
    for (Index a = 0; a < k; ++a) y[support[static_cast<std::size_t>(a)]] += sol[a];
    if (!y.allFinite() || y.minCoeff() < 0.0) return std::nullopt;
    return y;
}

/// Projected gradient ascent of a smooth concave function over a closed convex
/// set given by `project`. The step halves whenever a trial point lowers the
/// objective; iteration stops when ||P(x + eta g) - x|| / eta <= tol. With
/// `face_newton` (simplex only) a Newton step on the current face is tried once
/// the support has been stable for two steps; it is kept only if it does not
/// lower the objective.
template <typename Objective, typename Gradient, typename Project>
SolveResult projected_gradient(Objective&& f, Gradient&& grad, Project&& project, Vector x, double eta,
                               int max_iters, double tol, bool record, bool face_newton = false) {
    SolveResult res;
    double fx = f(x);
    if (!std::isfinite(fx)) throw NumericalError("solver: non-finite objective at the starting point");
    if (record) res.diagnostics.objective_trace.push_back(fx);
    int it = 0;
    double gnorm = std::numeric_limits<double>::infinity();
    bool converged = false;
    auto support_of = [](const Vector& v) {
        std::vector<Index> sup;
        for (Index i = 0; i < v.size(); ++i)
            if (v[i] > 0.0) sup.push_back(i);
        return sup;
    };
    std::vector<Index> support = support_of(x);
    int stable = 0;
    bool last_newton = false;
    while (it < max_iters) {
        ++it;
        const Vector g = grad(x);
        if (!g.allFinite())
            throw NumericalError("solver: non-finite gradient at iteration " + std::to_string(it) +
                                 " (objective " + std::to_string(fx) + ")");
        if (face_newton && stable >= 2 && !last_newton) {
            last_newton = true;
            if (auto y = face_newton_step(grad, x, g, support)) {
                const double fy = f(*y);
                if (std::isfinite(fy) && fy >= fx) {
                    x = std::move(*y);
                    fx = fy;
                    if (record) res.diagnostics.objective_trace.push_back(fx);
                    continue;
                }
            }
        }
        last_newton = false;
        Vector y;
        double fy = 0.0;
        bool stalled = false;
        for (;;) {
            y = project(Vector(x + eta * g));
            fy = f(y);
            if (fy >= fx) break;
            if ((y - x).lpNorm<Eigen::Infinity>() <= 1e-15) {
                stalled = true; // no representable ascent step left
                break;
            }
            eta *= 0.5;
            if (eta < 1e-300) {
                stalled = true;
                break;
            }
        }
        gnorm = (y - x).norm() / eta;
        if (stalled) {
            converged = true;
            break;
        }
        x = std::move(y);
        fx = fy;
        if (record) res.diagnostics.objective_trace.push_back(fx);
        std::vector<Index> sup = support_of(x);
        stable = sup == support ? stable + 1 : 0;
        support = std::move(sup);
        if (gnorm <= tol) {
            converged = true;
            break;
        }
    }
    res.weights = std::move(x);
    res.diagnostics.iterations = it;
    res.diagnostics.final_projected_gradient_norm = gnorm;
    res.diagnostics.objective_value = fx;
    res.diagnostics.converged = converged;
    return res;
}

/// Golden-section maximization of a unimodal function on [lo, hi].
template <typename F>
std::pair<double, double> golden_max(F&& f, double lo, double hi, double xtol) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > xtol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
        if (c >= d) break;
    }
    double best_x = fc >= fd ? c : d;
    double best_f = std::max(fc, fd);
    for (double e : {lo, hi}) {
        const double fe = f(e);
        if (fe > best_f) {
            best_f = fe;
            best_x = e;
        }
    }
    return {best_x, best_f};
}

} // namespace detail

/// Runs the projected-gradient loop from `warm_start`, then projects onto the
/// turnover ball around `warm_start` when the cap binds.
inline SolveResult solve_robust_mv(const Eigen::Ref<const Vector>& mu_e, const Eigen::Ref<const Matrix>& sigma,
                                   const Eigen::Ref<const Vector>& L, const SolverConfig& cfg,
                                   const Eigen::Ref<const Vector>& warm_start) {
    cfg.validate();
    const Index n = mu_e.size();
    if (n == 0) throw InvalidInput("solve_robust_mv: empty problem");
    detail::check_problem(warm_start, mu_e, sigma);
    if (!cfg.absorb_lipschitz) detail::require_shape(L.size() == n, "solve_robust_mv: L must have length n");
    if (!mu_e.allFinite() || !sigma.allFinite()) throw InvalidInput("solve_robust_mv: non-finite inputs");
    if (!on_simplex(warm_start, 1e-9, 1e-8)) throw InvalidInput("solve_robust_mv: warm start must lie on the simplex");

    const Vector x0 = project_simplex(warm_start);
    const double eta0 = default_step(sigma, cfg);
    auto f = [&](const Vector& x) { return objective(x, mu_e, sigma, L, cfg); };

    SolveResult res;
    const bool linf_route = !cfg.absorb_lipschitz && dual_of(cfg.p) == BallNorm::linf && cfg.gamma > 0.0 &&
                            L.maxCoeff() > 0.0;
    if (!linf_route) {
        auto g = [&](const Vector& x) { return gradient(x, mu_e, sigma, L, cfg); };
        res = detail::projected_gradient(f, g, [](const Vector& v) { return project_simplex(v); }, x0, eta0,
                                         cfg.max_iters, cfg.tol, cfg.record_trace, true);
    } else {
        // Epigraph form: max_u { max_{x in simplex, L_i x_i <= u} x'mu - theta x'Sigma x } - Gamma u,
        // concave in u, searched by golden section.
        SolverConfig inner = cfg;
        inner.gamma = 0.0;
        inner.absorb_lipschitz = true;
        double inv_sum = 0.0;
        bool has_free = false;
        for (Index i = 0; i < n; ++i) {
            if (L[i] > 0.0) inv_sum += 1.0 / L[i];
            else has_free = true;
        }
        const double u_lo = has_free ? 0.0 : 1.0 / inv_sum;
        const double u_hi = L.maxCoeff();
        Vector start = x0;
        int total_iters = 0;
        auto inner_solve = [&](double u) {
            Vector cap(n);
            for (Index i = 0; i < n; ++i)
                cap[i] = L[i] > 0.0 ? u / L[i] : std::numeric_limits<double>::infinity();
            auto proj = [&cap](const Vector& v) { return project_capped_simplex(v, cap); };
            auto fi = [&](const Vector& x) { return objective(x, mu_e, sigma, L, inner); };
            auto gi = [&](const Vector& x) { return Vector(mu_e - 2.0 * cfg.theta * (sigma * x)); };
            SolveResult r = detail::projected_gradient(fi, gi, proj, proj(start), eta0, cfg.max_iters, cfg.tol, false);
            total_iters += r.diagnostics.iterations;
            return r;
        };
        auto value_at = [&](double u) { return inner_solve(u).diagnostics.objective_value - cfg.gamma * u; };
        const auto [u_star, v_star] =
            detail::golden_max(value_at, u_lo, u_hi, 1e-12 * std::max(1.0, u_hi));
        (void)v_star;
        res = inner_solve(u_star);
        res.diagnostics.iterations = total_iters;
        res.diagnostics.objective_value = f(res.weights);
    }

    if (cfg.turnover_cap) {
        const double moved = (res.weights - x0).lpNorm<1>();
        if (moved > *cfg.turnover_cap) {
            const TurnoverProjection tp = project_turnover(res.weights, x0, *cfg.turnover_cap);
            res.weights = tp.weights;
            res.diagnostics.turnover_binding = true;
            res.diagnostics.turnover_converged = tp.converged;
            res.diagnostics.objective_value = f(res.weights);
        }
    }
    if (!std::isfinite(res.diagnostics.objective_value)) throw NumericalError("solve_robust_mv: non-finite objective");
    return res;
}

/// Cold start from equal weights.
inline SolveResult solve_robust_mv(const Eigen::Ref<const Vector>& mu_e, const Eigen::Ref<const Matrix>& sigma,
                                   const Eigen::Ref<const Vector>& L, const SolverConfig& cfg) {
    return solve_robust_mv(mu_e, sigma, L, cfg, equal_weights(mu_e.size()));
}

/// Optimal value V*(cfg) of an uncapped solve.
inline double optimal_value(const Eigen::Ref<const Vector>& mu_e, const Eigen::Ref<const Matrix>& sigma,
                            const Eigen::Ref<const Vector>& L, SolverConfig cfg) {
    cfg.turnover_cap.reset();
    return solve_robust_mv(mu_e, sigma, L, cfg).diagnostics.objective_value;
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

struct OracleResult {
    WeightVector weights;
    double value = 0.0;
};

namespace detail {

/// All barycentric points with coordinates in multiples of 1/k.
inline void for_each_grid_point(Index n, int k, const std::function<void(const Vector&)>& visit) {
    Vector x(n);
    std::vector<int> c(static_cast<std::size_t>(n), 0);
    std::function<void(Index, int)> rec = [&](Index i, int left) {
        if (i == n - 1) {
            c[static_cast<std::size_t>(i)] = left;
            for (Index j = 0; j < n; ++j) x[j] = static_cast<double>(c[static_cast<std::size_t>(j)]) / k;
            visit(x);
            return;
        }
        for (int a = 0; a <= left; ++a) {
            c[static_cast<std::size_t>(i)] = a;
            rec(i + 1, left - a);
        }
    };
    rec(0, k);
}

} // namespace detail

/// Maximizes f over the simplex (n <= 4): exhaustive barycentric grid with the
/// given step, then pattern refinement with lattice directions and shrinking
/// radius until the radius drops below 1e-10.
template <typename F>
OracleResult grid_search_simplex(F&& f, Index n, double grid_step, bool refine = true) {
    if (n < 1 || n > 4) throw ConfigError("grid_search_simplex: supports 1 <= n <= 4, got " + std::to_string(n));
    if (!(grid_step > 0.0 && grid_step <= 1.0)) throw ConfigError("grid_search_simplex: grid step must lie in (0, 1]");
    const int k = std::max(1, static_cast<int>(std::lround(1.0 / grid_step)));
    OracleResult best;
    best.value = -std::numeric_limits<double>::infinity();
    detail::for_each_grid_point(n, k, [&](const Vector& x) {
        const double v = f(x);
        if (v > best.value) {
            best.value = v;
            best.weights = x;
        }
    });
    if (!refine || n == 1) return best;

    // Lattice directions a in {-K..K}^(n-1), completed to sum zero.
    constexpr int K = 3;
    std::vector<Vector> dirs;
    const Index m = n - 1;
    std::vector<int> a(static_cast<std::size_t>(m), -K);
    for (;;) {
        Vector d = Vector::Zero(n);
        int s = 0;
        bool nonzero = false;
        for (Index j = 0; j < m; ++j) {
            d[j] = a[static_cast<std::size_t>(j)];
            s += a[static_cast<std::size_t>(j)];
            nonzero = nonzero || a[static_cast<std::size_t>(j)] != 0;
        }
        d[m] = -s;
        if (nonzero) dirs.push_back(d / static_cast<double>(K));
        Index j = 0;
        while (j < m && ++a[static_cast<std::size_t>(j)] > K) a[static_cast<std::size_t>(j++)] = -K;
        if (j == m) break;
    }
    // Coordinate transfers to every pair complete the set for any n.
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (i != j) {
                Vector d = Vector::Zero(n);
                d[i] = 1.0;
                d[j] = -1.0;
                dirs.push_back(d);
            }

    Vector x = best.weights;
    double fx = best.value;
    double h = grid_step;
    while (h > 1e-10) {
        bool improved = false;
        for (const Vector& d : dirs) {
            double step = h;
            for (Index i = 0; i < n; ++i)
                if (d[i] < 0.0) step = std::min(step, x[i] / -d[i]);
            if (step <= 0.0) continue;
            Vector y = (x + step * d).cwiseMax(0.0);
            y /= y.sum();
            const double fy = f(y);
            if (fy > fx) {
                x = y;
                fx = fy;
                improved = true;
            }
        }
        if (!improved) h *= 0.5;
    }
    best.weights = x;
    best.value = fx;
    return best;
}

/// Certifies the robust mean-variance optimum on small instances (n <= 4).
inline OracleResult brute_force_oracle(const Eigen::Ref<const Vector>& mu_e, const Eigen::Ref<const Matrix>& sigma,
                                       const Eigen::Ref<const Vector>& L, const SolverConfig& cfg, double grid_step) {
    const Index n = mu_e.size();
    if (n > 4) throw ConfigError("brute_force_oracle: refuses n > 4 (got " + std::to_string(n) + ")");
    detail::check_problem(mu_e, mu_e, sigma);
    const Vector mu = mu_e;
    const Matrix S = sigma;
    const Vector Lc = L;
    return grid_search_simplex([&](const Vector& x) { return objective(x, mu, S, Lc, cfg); }, n, grid_step);
}

/// pi* = -(V*(Gamma + d) - V*(Gamma - d)) / (2 d).
inline double shadow_price(const Eigen::Ref<const Vector>& mu_e, const Eigen::Ref<const Matrix>& sigma,
                           const Eigen::Ref<const Vector>& L, const SolverConfig& cfg, double delta_gamma) {
    if (!(delta_gamma > 0.0)) throw InvalidInput("shadow_price: delta_gamma must be > 0");
    if (cfg.gamma - delta_gamma < 0.0) throw InvalidInput("shadow_price: Gamma - delta must be >= 0");
    SolverConfig up = cfg, down = cfg;
    up.gamma = cfg.gamma + delta_gamma;
    down.gamma = cfg.gamma - delta_gamma;
    return -(optimal_value(mu_e, sigma, L, up) - optimal_value(mu_e, sigma, L, down)) / (2.0 * delta_gamma);
}

} // namespace eapo
