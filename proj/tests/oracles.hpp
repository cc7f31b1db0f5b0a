#pragma once

// Independent reference implementations used only by the tests. Each one is
// written from the defining formula, without calling the library routine it
// checks.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// (1 - lambda/lambda_max)^m r by repeated multiplication.
inline double penalty(double r, double lam, double lam_max, int m) {
    if (lam_max == 0.0) return r;
    const double l = std::min(std::max(lam, 0.0), lam_max);
    const double base = 1.0 - l / lam_max;
    double f = 1.0;
    for (int k = 0; k < m; ++k) f *= base;
    return f * r;
}

/// Simplex projection by bisection on the KKT threshold tau:
/// sum_i max(v_i - tau, 0) = 1.
inline Vec simplex_projection_bisection(const Vec& v) {
    double lo = v.minCoeff() - 1.0, hi = v.maxCoeff();
    for (int it = 0; it < 2000; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        double s = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) s += std::max(v[i] - mid, 0.0);
        if (s > 1.0) lo = mid;
        else hi = mid;
    }
    const double tau = 0.5 * (lo + hi);
    Vec x(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) x[i] = std::max(v[i] - tau, 0.0);
    return x;
}

/// Maximizes a concave function over the simplex: barycentric grid of step
/// 1/k followed by exact line searches along pairwise transfers e_i - e_j.
inline std::pair<Vec, double> simplex_max(const std::function<double(const Vec&)>& f, int n, int k = 40) {
    Vec best_x;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> c(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int i, int left) {
        if (i == n - 1) {
            c[static_cast<std::size_t>(i)] = left;
            Vec x(n);
            for (int j = 0; j < n; ++j) x[j] = c[static_cast<std::size_t>(j)] / static_cast<double>(k);
            const double v = f(x);
            if (v > best) {
                best = v;
                best_x = x;
            }
            return;
        }
        for (int a = 0; a <= left; ++a) {
            c[static_cast<std::size_t>(i)] = a;
            rec(i + 1, left - a);
        }
    };
    rec(0, k);

    Vec x = best_x;
    for (int sweep = 0; sweep < 500; ++sweep) {
        const double before = best;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                // move t in [-x_i, x_j] from j to i
                const double a = -x[i], b = x[j];
                if (b - a <= 0.0) continue;
                auto g = [&](double t) {
                    Vec y = x;
                    y[i] += t;
                    y[j] -= t;
                    y[i] = std::max(y[i], 0.0);
                    y[j] = std::max(y[j], 0.0);
                    return f(y);
                };
                const double r = (std::sqrt(5.0) - 1.0) / 2.0;
                double lo = a, hi = b;
                double c1 = hi - r * (hi - lo), c2 = lo + r * (hi - lo);
                double f1 = g(c1), f2 = g(c2);
                for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
                    if (f1 >= f2) {
                        hi = c2;
                        c2 = c1;
                        f2 = f1;
                        c1 = hi - r * (hi - lo);
                        f1 = g(c1);
                    } else {
                        lo = c1;
                        c1 = c2;
                        f1 = f2;
                        c2 = lo + r * (hi - lo);
                        f2 = g(c2);
                    }
                }
                const double t = f1 >= f2 ? c1 : c2;
                const double ft = g(t);
                if (ft > best) {
                    x[i] = std::max(x[i] + t, 0.0);
                    x[j] = std::max(x[j] - t, 0.0);
                    best = ft;
                }
            }
        if (best - before <= 1e-15 * std::max(1.0, std::abs(best))) break;
    }
    return {x, best};
}

/// CVaR as the average of the worst (1 - alpha) M losses, the boundary
/// scenario entering with its fractional weight.
inline double cvar_sorted_tail(const Vec& losses, double alpha) {
    std::vector<double> d(losses.data(), losses.data() + losses.size());
    std::sort(d.begin(), d.end(), [](double a, double b) { return a > b; });
    const double a = (1.0 - alpha) * static_cast<double>(d.size());
    const auto full = static_cast<std::size_t>(std::floor(a));
    double acc = 0.0;
    for (std::size_t k = 0; k < full && k < d.size(); ++k) acc += d[k];
    const double frac = a - static_cast<double>(full);
    if (frac > 0.0 && full < d.size()) acc += frac * d[full];
    return acc / a;
}

/// KL worst-case mean sup_{eta > 0} { -eta log mean exp(-l/eta) - eta rho }.
/// The derivative in eta is KL(tilt_eta) - rho, so the maximizer is the root of
/// the tilt divergence, found by bisection in log eta.
inline double kl_dual_closed_form(const Vec& l, double rho) {
    const double lo = l.minCoeff();
    const double M = static_cast<double>(l.size());
    if (rho == 0.0) return l.mean();
    int count_min = 0;
    for (Eigen::Index i = 0; i < l.size(); ++i) count_min += l[i] == lo ? 1 : 0;
    if (rho >= std::log(M / count_min)) return lo;
    auto logz = [&](double eta) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < l.size(); ++i) s += std::exp(-(l[i] - lo) / eta);
        return -lo / eta + std::log(s / M);
    };
    auto kl = [&](double eta) {
        double s = 0.0, el = 0.0;
        for (Eigen::Index i = 0; i < l.size(); ++i) {
            const double w = std::exp(-(l[i] - lo) / eta);
            s += w;
            el += w * l[i];
        }
        el /= s;
        return -el / eta - logz(eta);
    };
    const double spread = l.maxCoeff() - lo;
    double a = std::log(1e-12 * spread), b = std::log(1e12 * spread);
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (a + b);
        if (mid <= a || mid >= b) break;
        if (kl(std::exp(mid)) > rho) a = mid;
        else b = mid;
    }
    const double eta = std::exp(0.5 * (a + b));
    return -eta * logz(eta) - eta * rho;
}

/// gamma_l = (1/T) sum_{t=l+1}^{T} (d_t - dbar)(d_{t-l} - dbar); long-run
/// variance gamma_0 + 2 sum_l (1 - l/(L+1)) gamma_l, written as literal loops.
inline double newey_west_lrv(const std::vector<double>& d, int L) {
    const std::size_t T = d.size();
    double dbar = 0.0;
    for (std::size_t t = 0; t < T; ++t) dbar += d[t];
    dbar /= static_cast<double>(T);
    std::vector<double> gam(static_cast<std::size_t>(L) + 1, 0.0);
    for (int l = 0; l <= L; ++l) {
        double s = 0.0;
        for (std::size_t t = static_cast<std::size_t>(l); t < T; ++t)
            s += (d[t] - dbar) * (d[t - static_cast<std::size_t>(l)] - dbar);
        gam[static_cast<std::size_t>(l)] = s / static_cast<double>(T);
    }
    double lrv = gam[0];
    for (int l = 1; l <= L; ++l) lrv += 2.0 * (1.0 - l / (L + 1.0)) * gam[static_cast<std::size_t>(l)];
    return lrv;
}

/// Worst drawdown over all windows (u, v) of the wealth path starting at 1.
inline double max_drawdown_exhaustive(const Vec& r) {
    std::vector<double> w(static_cast<std::size_t>(r.size()) + 1, 1.0);
    for (Eigen::Index t = 0; t < r.size(); ++t)
        w[static_cast<std::size_t>(t) + 1] = w[static_cast<std::size_t>(t)] * (1.0 + r[t]);
    double mdd = 0.0;
    for (std::size_t u = 0; u < w.size(); ++u)
        for (std::size_t v = u; v < w.size(); ++v) mdd = std::min(mdd, w[v] / w[u] - 1.0);
    return mdd;
}

/// Ledoit-Wolf (2004) constant-correlation shrinkage intensity, elementwise.
inline double ledoit_wolf_cc_delta(const Mat& Y) {
    const auto T = Y.rows();
    const auto N = Y.cols();
    std::vector<double> mean(static_cast<std::size_t>(N), 0.0);
    for (Eigen::Index j = 0; j < N; ++j) {
        for (Eigen::Index t = 0; t < T; ++t) mean[static_cast<std::size_t>(j)] += Y(t, j);
        mean[static_cast<std::size_t>(j)] /= static_cast<double>(T);
    }
    Mat X(T, N);
    for (Eigen::Index t = 0; t < T; ++t)
        for (Eigen::Index j = 0; j < N; ++j) X(t, j) = Y(t, j) - mean[static_cast<std::size_t>(j)];
    Mat S = Mat::Zero(N, N);
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j) {
            double s = 0.0;
            for (Eigen::Index t = 0; t < T; ++t) s += X(t, i) * X(t, j);
            S(i, j) = s / static_cast<double>(T);
        }
    double rbar = 0.0;
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j)
            if (i != j) rbar += S(i, j) / std::sqrt(S(i, i) * S(j, j));
    rbar /= static_cast<double>(N * (N - 1));
    Mat F(N, N);
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j)
            F(i, j) = i == j ? S(i, i) : rbar * std::sqrt(S(i, i) * S(j, j));

    double pi = 0.0, rho_diag = 0.0, rho_off = 0.0, gamma = 0.0;
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j) {
            double pij = 0.0;
            for (Eigen::Index t = 0; t < T; ++t) {
                const double e = X(t, i) * X(t, j) - S(i, j);
                pij += e * e;
            }
            pij /= static_cast<double>(T);
            pi += pij;
            if (i == j) rho_diag += pij;
            gamma += (F(i, j) - S(i, j)) * (F(i, j) - S(i, j));
        }
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j) {
            if (i == j) continue;
            double th_ii = 0.0, th_jj = 0.0;
            for (Eigen::Index t = 0; t < T; ++t) {
                th_ii += (X(t, i) * X(t, i) - S(i, i)) * (X(t, i) * X(t, j) - S(i, j));
                th_jj += (X(t, j) * X(t, j) - S(j, j)) * (X(t, i) * X(t, j) - S(i, j));
            }
            th_ii /= static_cast<double>(T);
            th_jj /= static_cast<double>(T);
            rho_off += 0.5 * rbar *
                       (std::sqrt(S(j, j) / S(i, i)) * th_ii + std::sqrt(S(i, i) / S(j, j)) * th_jj);
        }
    const double kappa = (pi - rho_diag - rho_off) / gamma;
    return std::min(1.0, std::max(0.0, kappa / static_cast<double>(T)));
}

/// Random point on the simplex (flat Dirichlet).
template <typename Rng>
Vec random_simplex(int n, Rng& rng) {
    std::exponential_distribution<double> e(1.0);
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = e(rng);
    return x / x.sum();
}

/// Random symmetric positive definite matrix A A' / n + eps I.
template <typename Rng>
Mat random_spd(int n, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    Mat A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = g(rng);
    return scale * (A * A.transpose() / n + 0.05 * Mat::Identity(n, n));
}

} // namespace oracle
