#pragma once

// Emissions-penalty operator P_m(r, lambda) = (1 - lambda / lambda_max)^m * r,
// the emissions-adjusted return panel and mean, and asset-wise Lipschitz
// constants of the adjusted mean in the intensity.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "eapo/types.hpp"

namespace eapo {

/// Cross-section of revenue-normalized intensities for one scope at one date.
class IntensityVector {
public:
    IntensityVector() = default;

    /// Validates finiteness/nonnegativity and computes the cross-sectional maximum.
    explicit IntensityVector(Vector values, Scope scope = Scope::one)
        : values_(std::move(values)), scope_(scope) {
        for (Index i = 0; i < values_.size(); ++i) {
            const double v = values_[i];
            if (!std::isfinite(v) || v < 0.0)
                throw InvalidInput("IntensityVector: intensity " + std::to_string(i) +
                                   " must be finite and >= 0, got " + std::to_string(v));
        }
        lambda_max_ = values_.size() == 0 ? 0.0 : values_.maxCoeff();
    }

    const Vector& values() const noexcept { return values_; }
    Scope scope() const noexcept { return scope_; }
    double lambda_max() const noexcept { return lambda_max_; }
    Index size() const noexcept { return values_.size(); }
    double operator[](Index i) const { return values_[i]; }
    bool all_zero() const noexcept { return lambda_max_ == 0.0; }

private:
    Vector values_;
    Scope scope_ = Scope::one;
    double lambda_max_ = 0.0;
};

struct PenaltyParams {
    int m = 1;
    Scope scope = Scope::one;

    void validate() const {
        if (m < 1) throw ConfigError("penalty curvature m must be >= 1, got " + std::to_string(m));
    }
};

/// Haircut factor (1 - lambda/lambda_max)^m with lambda clamped into [0, lambda_max].
/// Returns 1 when lambda_max == 0.
inline double penalty_factor(double lambda, double lambda_max, int m) {
    if (!std::isfinite(lambda) || !std::isfinite(lambda_max))
        throw InvalidInput("penalty: non-finite intensity");
    if (lambda_max < 0.0) throw InvalidInput("penalty: lambda_max must be >= 0");
    if (m < 1) throw ConfigError("penalty: curvature m must be >= 1");
    if (lambda_max == 0.0) return 1.0;
    const double clamped = std::clamp(lambda, 0.0, lambda_max);
    return std::pow(1.0 - clamped / lambda_max, m);
}

inline double penalty(double r, double lambda, double lambda_max, int m) {
    if (!std::isfinite(r)) throw InvalidInput("penalty: non-finite payoff");
    return penalty_factor(lambda, lambda_max, m) * r;
}

/// Per-asset haircut factors for a cross-section.
inline Vector penalty_factors(const IntensityVector& lambda, const PenaltyParams& params) {
    params.validate();
    Vector f(lambda.size());
    for (Index i = 0; i < lambda.size(); ++i) f[i] = penalty_factor(lambda[i], lambda.lambda_max(), params.m);
    return f;
}

/// Applies the operator column-wise: column i is scaled by asset i's factor.
inline ReturnMatrix adjust_returns(const Eigen::Ref<const ReturnMatrix>& returns, const IntensityVector& lambda,
                                   const PenaltyParams& params) {
    detail::require_shape(returns.cols() == lambda.size(),
                          "adjust_returns: " + std::to_string(returns.cols()) + " return columns vs " +
                              std::to_string(lambda.size()) + " intensities");
    if (!returns.allFinite()) throw InvalidInput("adjust_returns: non-finite returns");
    return returns * penalty_factors(lambda, params).asDiagonal();
}

/// Sample mean of the adjusted returns over a rolling window.
inline Vector emissions_adjusted_mean(const Eigen::Ref<const ReturnMatrix>& window, const IntensityVector& lambda,
                                      const PenaltyParams& params) {
    if (window.rows() < 2)
        throw InsufficientData("emissions_adjusted_mean: window needs >= 2 rows, got " +
                               std::to_string(window.rows()));
    return adjust_returns(window, lambda, params).colwise().mean().transpose();
}

/// L_i = m * E|R_i| / lambda_max. Empty when lambda_max == 0: the whole
/// cross-section has zero intensity and the ambiguity penalty must be skipped.
inline std::optional<Vector> lipschitz_constants(const Eigen::Ref<const Vector>& mean_abs_returns, double lambda_max,
                                                 int m) {
    if (m < 1) throw ConfigError("lipschitz_constants: curvature m must be >= 1");
    if (!std::isfinite(lambda_max) || lambda_max < 0.0)
        throw InvalidInput("lipschitz_constants: lambda_max must be finite and >= 0");
    if ((mean_abs_returns.array() < 0.0).any() || !mean_abs_returns.allFinite())
        throw InvalidInput("lipschitz_constants: mean absolute returns must be finite and >= 0");
    if (lambda_max == 0.0) return std::nullopt;
    return Vector(static_cast<double>(m) * mean_abs_returns / lambda_max);
}

/// Convenience overload estimating E|R_i| from a window.
inline std::optional<Vector> lipschitz_constants(const Eigen::Ref<const ReturnMatrix>& window,
                                                 const IntensityVector& lambda, const PenaltyParams& params) {
    if (window.rows() < 1) throw InsufficientData("lipschitz_constants: empty window");
    const Vector mean_abs = window.cwiseAbs().colwise().mean().transpose();
    return lipschitz_constants(mean_abs, lambda.lambda_max(), params.m);
}

} // namespace eapo
