#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "eapo/errors.hpp"

namespace eapo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Rows are dates, columns are assets. Entries are gross returns (1 + r).
using ReturnMatrix = Eigen::MatrixXd;

/// Long-only weights on the unit simplex.
using WeightVector = Eigen::VectorXd;

/// Emissions scope. One scope is fixed per run.
enum class Scope : int { one = 1, two = 2, three = 3 };

inline Scope scope_from_int(int s) {
    if (s < 1 || s > 3) throw ConfigError("scope must be 1, 2 or 3, got " + std::to_string(s));
    return static_cast<Scope>(s);
}

/// Norm of the intensity ambiguity ball.
enum class BallNorm { l1, l2, linf };

/// Hoelder conjugate of the ball norm: l1 <-> linf, l2 <-> l2.
inline BallNorm dual_of(BallNorm p) {
    switch (p) {
    case BallNorm::l1: return BallNorm::linf;
    case BallNorm::l2: return BallNorm::l2;
    case BallNorm::linf: return BallNorm::l1;
    }
    throw ConfigError("unsupported ball norm");
}

inline BallNorm ball_norm_from_string(const std::string& s) {
    if (s == "1" || s == "l1") return BallNorm::l1;
    if (s == "2" || s == "l2") return BallNorm::l2;
    if (s == "inf" || s == "linf" || s == "infinity") return BallNorm::linf;
    throw ConfigError("unsupported ball norm '" + s + "' (expected 1, 2 or inf)");
}

inline std::string to_string(BallNorm p) {
    switch (p) {
    case BallNorm::l1: return "1";
    case BallNorm::l2: return "2";
    case BallNorm::linf: return "inf";
    }
    return "?";
}

template <typename Derived>
double norm_of(const Eigen::MatrixBase<Derived>& v, BallNorm q) {
    switch (q) {
    case BallNorm::l1: return v.template lpNorm<1>();
    case BallNorm::l2: return v.norm();
    case BallNorm::linf: return v.size() == 0 ? 0.0 : v.template lpNorm<Eigen::Infinity>();
    }
    throw ConfigError("unsupported norm");
}

inline constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

/// True when x >= -tol componentwise and |sum - 1| <= sum_tol.
inline bool on_simplex(const Eigen::Ref<const Vector>& x, double tol = 1e-12, double sum_tol = 1e-10) {
    if (x.size() == 0) return false;
    return x.minCoeff() >= -tol && std::abs(x.sum() - 1.0) <= sum_tol;
}

inline WeightVector equal_weights(Index n) {
    if (n <= 0) throw InvalidInput("equal_weights: need n >= 1");
    return WeightVector::Constant(n, 1.0 / static_cast<double>(n));
}

} // namespace eapo
