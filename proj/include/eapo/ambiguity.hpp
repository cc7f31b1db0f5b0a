#pragma once

// Geometry of the intensity ambiguity set: the dual-norm envelope penalty,
// Monte Carlo estimates of the worst-case mean gap over the ball, and
// confidence-ellipse summaries of 2x2 dispersion matrices.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <optional>
#include <random>

#include "eapo/penalty.hpp"
#include "eapo/types.hpp"

namespace eapo {

struct AmbiguityBall {
    BallNorm p = BallNorm::l2;
    double gamma = 1.0;
    /// Symmetric PSD root of the intensity dispersion matrix. Sampled
    /// perturbations are whitener * u with ||u||_p <= gamma.
    std::optional<Matrix> whitener;

    void validate(Index n) const {
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw ConfigError("AmbiguityBall: gamma must be finite and > 0");
        if (whitener) {
            detail::require_shape(whitener->rows() == n && whitener->cols() == n,
                                  "AmbiguityBall: whitener must be n x n");
            if (!whitener->isApprox(whitener->transpose(), 1e-10))
                throw InvalidInput("AmbiguityBall: whitener must be symmetric");
        }
    }
};

inline constexpr double kEigenFloor = 1e-12;

/// Symmetric square root of a PSD dispersion matrix, eigenvalues floored at 1e-12.
inline Matrix whitener_from_covariance(const Eigen::Ref<const Matrix>& cov) {
    detail::require_shape(cov.rows() == cov.cols(), "whitener_from_covariance: matrix must be square");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (cov + cov.transpose()));
    if (eig.info() != Eigen::Success) throw NumericalError("whitener_from_covariance: eigen decomposition failed");
    const Vector root = eig.eigenvalues().cwiseMax(kEigenFloor).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

/// ||whitener^{-1} eps||_p, with the inverse root built from floored eigenvalues.
inline double whitened_norm(const Eigen::Ref<const Vector>& eps, const AmbiguityBall& ball) {
    if (!ball.whitener) return norm_of(eps, ball.p);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(*ball.whitener);
    const Vector inv = eig.eigenvalues().cwiseMax(kEigenFloor).cwiseInverse();
    const Vector u = eig.eigenvectors() * (inv.asDiagonal() * (eig.eigenvectors().transpose() * eps));
    return norm_of(u, ball.p);
}

/// Gamma * ||diag(L) x||_q with q the Hoelder conjugate of the ball norm.
inline double dual_norm_penalty(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& L,
                                const AmbiguityBall& ball) {
    detail::require_shape(x.size() == L.size(), "dual_norm_penalty: x and L differ in length");
    if (!(ball.gamma >= 0.0)) throw ConfigError("dual_norm_penalty: gamma must be >= 0");
    const Vector scaled = L.cwiseProduct(x);
    return ball.gamma * norm_of(scaled, dual_of(ball.p));
}

namespace detail {

/// Uniform draw on the unit sphere of the given norm.
template <typename Rng>
Vector unit_sphere_draw(Index n, BallNorm p, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector u(n);
    switch (p) {
    case BallNorm::l2: {
        double nrm = 0.0;
        do {
            for (Index i = 0; i < n; ++i) u[i] = gauss(rng);
            nrm = u.norm();
        } while (nrm == 0.0);
        return u / nrm;
    }
    case BallNorm::l1: {
        std::exponential_distribution<double> expo(1.0);
        double total = 0.0;
        do {
            for (Index i = 0; i < n; ++i) u[i] = expo(rng);
            total = u.sum();
        } while (total == 0.0);
        for (Index i = 0; i < n; ++i) u[i] = (unif(rng) < 0.5 ? -1.0 : 1.0) * u[i] / total;
        return u;
    }
    case BallNorm::linf: {
        for (Index i = 0; i < n; ++i) u[i] = 2.0 * unif(rng) - 1.0;
        std::uniform_int_distribution<Index> pick(0, n - 1);
        u[pick(rng)] = unif(rng) < 0.5 ? -1.0 : 1.0;
        return u;
    }
    }
    throw ConfigError("unsupported ball norm");
}

} // namespace detail

/// Draws one perturbation from the ball: 80% on the boundary, 20% in the
/// interior (radius scaled by U^{1/n}).
template <typename Rng>
Vector sample_ball(const AmbiguityBall& ball, Index n, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector u = detail::unit_sphere_draw(n, ball.p, rng);
    double radius = ball.gamma;
    if (unif(rng) >= 0.8) radius *= std::pow(unif(rng), 1.0 / static_cast<double>(n));
    u *= radius;
    if (ball.whitener) return *ball.whitener * u;
    return u;
}

/// Mean-gap x'(mu_e(lambda_hat) - mu_e(clamp(lambda_hat + eps))) for one perturbation.
/// lambda_max stays at the point estimate's cross-sectional maximum.
inline double mean_gap(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& plain_mean,
                       const IntensityVector& lambda_hat, const Eigen::Ref<const Vector>& eps, int m) {
    double gap = 0.0;
    const double lmax = lambda_hat.lambda_max();
    for (Index i = 0; i < x.size(); ++i) {
        const double base = penalty_factor(lambda_hat[i], lmax, m);
        const double moved = penalty_factor(lambda_hat[i] + eps[i], lmax, m);
        gap += x[i] * plain_mean[i] * (base - moved);
    }
    return gap;
}

/// Largest realized mean-gap over n_samples perturbations drawn from the ball
/// (the zero perturbation is always included, so the result is >= 0).
inline double sampled_worst_case_gap(const Eigen::Ref<const Vector>& x, const IntensityVector& lambda_hat,
                                     const AmbiguityBall& ball, const PenaltyParams& params,
                                     const Eigen::Ref<const ReturnMatrix>& returns_window, int n_samples,
                                     std::uint64_t seed) {
    const Index n = x.size();
    detail::require_shape(lambda_hat.size() == n && returns_window.cols() == n,
                          "sampled_worst_case_gap: dimension mismatch");
    if (n_samples < 1) throw InvalidInput("sampled_worst_case_gap: n_samples must be >= 1");
    if (returns_window.rows() < 1) throw InsufficientData("sampled_worst_case_gap: empty window");
    params.validate();
    ball.validate(n);

    const Vector plain_mean = returns_window.colwise().mean().transpose();
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        const Vector eps = sample_ball(ball, n, rng);
        worst = std::max(worst, mean_gap(x, plain_mean, lambda_hat, eps, params.m));
    }
    return worst;
}

struct EllipseStats {
    double axis1 = 0.0;
    double axis2 = 0.0;
    double area = 0.0;
};

/// Chi-square quantile with 2 degrees of freedom: -2 log(1 - c).
inline double chi2_2dof_quantile(double confidence) {
    if (!(confidence > 0.0 && confidence < 1.0))
        throw InvalidInput("chi2_2dof_quantile: confidence must lie in (0, 1)");
    return -2.0 * std::log1p(-confidence);
}

/// Semi-axes sqrt(chi2_2(c) * eigenvalue) and area pi * a1 * a2 of the
/// confidence ellipse of a 2x2 PSD covariance.
inline EllipseStats ellipse_stats(const Eigen::Ref<const Matrix>& cov2x2, double confidence = 0.95) {
    detail::require_shape(cov2x2.rows() == 2 && cov2x2.cols() == 2, "ellipse_stats: need a 2x2 matrix");
    if (!cov2x2.allFinite()) throw InvalidInput("ellipse_stats: non-finite covariance");
    const double asym = std::abs(cov2x2(0, 1) - cov2x2(1, 0));
    const double scale = std::max(1.0, cov2x2.cwiseAbs().maxCoeff());
    if (asym > 1e-12 * scale) throw InvalidInput("ellipse_stats: covariance must be symmetric");

    const Eigen::Matrix2d cov = cov2x2;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
    Eigen::Vector2d ev = eig.eigenvalues(); // ascending
    if (ev[0] < -1e-12 * scale) throw InvalidInput("ellipse_stats: covariance is not PSD");
    ev = ev.cwiseMax(0.0);

    const double q = chi2_2dof_quantile(confidence);
    EllipseStats out;
    out.axis1 = std::sqrt(q * ev[1]);
    out.axis2 = std::sqrt(q * ev[0]);
    out.area = std::numbers::pi * out.axis1 * out.axis2;
    return out;
}

} // namespace eapo
