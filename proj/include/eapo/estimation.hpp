#pragma once

// Statistical pre-processing: Ledoit-Wolf linear shrinkage of the return
// covariance, rolling means, and sector-aware hierarchical multiple
// imputation of missing emissions/revenue pairs.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "eapo/types.hpp"

namespace eapo {

// ---------------------------------------------------------------------------
// Covariance shrinkage
// ---------------------------------------------------------------------------

enum class ShrinkageTarget { constant_correlation, identity_scaled };

struct ShrinkageResult {
    Matrix sigma_hat;
    double delta = 0.0;
    ShrinkageTarget target_kind = ShrinkageTarget::constant_correlation;
    bool jittered = false;
    std::vector<std::string> warnings;
};

inline constexpr double kMinEigenvalue = 1e-10;

/// Makes a symmetric matrix positive definite: when its smallest eigenvalue is
/// below 1e-10 the diagonal is lifted by (1e-10 - min_eig) + 1e-10 * trace / n.
/// Returns true when a shift was applied.
inline bool make_positive_definite(Matrix& sigma) {
    const Index n = sigma.rows();
    if (n == 0) return false;
    sigma = 0.5 * (sigma + sigma.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw NumericalError("make_positive_definite: eigen solver failed");
    const double min_eig = eig.eigenvalues()[0];
    if (min_eig >= kMinEigenvalue) return false;
    const double trace_scale = std::max(sigma.trace() / static_cast<double>(n), 0.0);
    const double shift = (kMinEigenvalue - min_eig) + kMinEigenvalue * trace_scale;
    sigma.diagonal().array() += shift;
    return true;
}

/// Ledoit-Wolf shrinkage toward the chosen target. Moments use 1/T
/// normalization; delta is the closed-form optimal intensity clipped to [0,1].
inline ShrinkageResult ledoit_wolf(const Eigen::Ref<const ReturnMatrix>& window,
                                   ShrinkageTarget target = ShrinkageTarget::constant_correlation) {
    const Index T = window.rows();
    const Index n = window.cols();
    if (T < 2) throw InsufficientData("ledoit_wolf: need >= 2 rows, got " + std::to_string(T));
    if (n < 1) throw InsufficientData("ledoit_wolf: need >= 1 column");
    if (!window.allFinite()) throw InvalidInput("ledoit_wolf: non-finite returns");

    ShrinkageResult out;
    out.target_kind = target;
    const double t = static_cast<double>(T);

    const Vector mean = window.colwise().mean().transpose();
    const Matrix X = window.rowwise() - mean.transpose();
    Matrix S = (X.transpose() * X) / t;

    // Floor degenerate (constant) columns.
    Vector var = S.diagonal();
    double positive_sum = 0.0;
    Index positive_count = 0;
    for (Index i = 0; i < n; ++i)
        if (var[i] > 0.0) {
            positive_sum += var[i];
            ++positive_count;
        }
    const double floor = 1e-12 * (positive_count > 0 ? positive_sum / static_cast<double>(positive_count) : 1.0);
    for (Index i = 0; i < n; ++i) {
        if (var[i] <= floor) {
            out.warnings.push_back("degenerate asset " + std::to_string(i) + ": zero variance, floored");
            var[i] = floor;
            S(i, i) = floor;
        }
    }

    if (n == 1) {
        out.sigma_hat = S;
        out.delta = 0.0;
        out.jittered = make_positive_definite(out.sigma_hat);
        return out;
    }

    Matrix F(n, n);
    double delta = 0.0;

    if (target == ShrinkageTarget::constant_correlation) {
        const Vector sd = var.cwiseSqrt();
        double corr_sum = 0.0;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                if (i != j) corr_sum += S(i, j) / (sd[i] * sd[j]);
        const double rbar = corr_sum / static_cast<double>(n * (n - 1));
        F = rbar * (sd * sd.transpose());
        F.diagonal() = var;

        const Matrix Y = X.array().square().matrix();
        const Matrix phi = (Y.transpose() * Y) / t - 2.0 * ((X.transpose() * X).array() * S.array()).matrix() / t +
                           S.array().square().matrix();
        const double pi_hat = phi.sum();

        const Matrix X3 = X.array().cube().matrix();
        Matrix theta = (X3.transpose() * X) / t;
        theta -= (var.asDiagonal() * S);
        theta.diagonal().setZero();
        double rho_off = 0.0;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                if (i != j) rho_off += (sd[j] / sd[i]) * theta(i, j);
        const double rho_hat = phi.diagonal().sum() + rbar * rho_off;
        const double gamma_hat = (F - S).squaredNorm();

        // n == 2 makes F == S up to rounding; the intensity is then immaterial
        if (gamma_hat > 1e-14 * S.squaredNorm()) {
            const double kappa = (pi_hat - rho_hat) / gamma_hat;
            delta = std::clamp(kappa / t, 0.0, 1.0);
        }
    } else {
        const double mu = S.trace() / static_cast<double>(n);
        F = mu * Matrix::Identity(n, n);
        const double d2 = (S - F).squaredNorm();
        double b_sum = 0.0;
        for (Index r = 0; r < T; ++r) {
            const Vector xr = X.row(r).transpose();
            b_sum += (xr * xr.transpose() - S).squaredNorm();
        }
        const double b2 = std::min(b_sum / (t * t), d2);
        if (d2 > 0.0) delta = std::clamp(b2 / d2, 0.0, 1.0);
    }

    out.delta = delta;
    out.sigma_hat = delta * F + (1.0 - delta) * S;
    out.jittered = make_positive_definite(out.sigma_hat);
    return out;
}

/// Per-column arithmetic mean.
inline Vector rolling_mean(const Eigen::Ref<const ReturnMatrix>& window) {
    if (window.rows() < 1) throw InsufficientData("rolling_mean: empty window");
    return window.colwise().mean().transpose();
}

// ---------------------------------------------------------------------------
// Hierarchical multiple imputation
// ---------------------------------------------------------------------------

/// tCO2e per $mm of revenue.
inline double revenue_intensity(double tco2e, double revenue_usd) { return tco2e / (revenue_usd * 1e-6); }

/// One firm in one cross-section. Missing values are empty.
struct FirmRecord {
    std::string ticker;
    std::optional<double> emissions;   // tCO2e
    std::optional<double> revenue_usd; // trailing-twelve-month revenue
};

/// Posterior of one sector's location on the log scale.
struct SectorPosterior {
    Index n_obs = 0;
    double sample_mean = 0.0;
    double within_var = 0.0; // tau^2 or upsilon^2 used for this sector
    double post_mean = 0.0;
    double post_var = 0.0;
};

/// Empirical-Bayes fit for one log-scale variable.
struct HierarchicalFit {
    double global_mean = 0.0;
    double prior_var = 0.0;  // between-sector variance
    double pooled_var = 0.0; // pooled within-sector variance
    std::map<std::string, SectorPosterior> sectors;

    /// Posterior of a sector; unseen sectors fall back to the global distribution.
    SectorPosterior posterior(const std::string& sector) const {
        if (auto it = sectors.find(sector); it != sectors.end() && it->second.n_obs > 0) return it->second;
        SectorPosterior fallback;
        fallback.within_var = pooled_var;
        fallback.post_mean = global_mean;
        fallback.post_var = prior_var;
        return fallback;
    }
};

inline constexpr double kVarianceFloor = 1e-6;

/// Gaussian sector model on log values: sector means shrink toward the grand
/// mean, prior variance by method of moments across sector means, within-sector
/// variance pooled for sectors with fewer than 3 observations.
inline HierarchicalFit fit_hierarchical(const std::vector<double>& log_values,
                                        const std::vector<std::string>& sector_of_value,
                                        const std::vector<std::string>& all_sectors) {
    if (log_values.empty()) throw InsufficientData("fit_hierarchical: no observed values");
    HierarchicalFit fit;
    const double N = static_cast<double>(log_values.size());

    std::map<std::string, std::vector<double>> by_sector;
    for (const auto& s : all_sectors) by_sector[s];
    for (std::size_t i = 0; i < log_values.size(); ++i) by_sector[sector_of_value[i]].push_back(log_values[i]);

    double total = 0.0;
    for (double v : log_values) total += v;
    fit.global_mean = total / N;

    double within_ss = 0.0;
    Index observed_sectors = 0;
    for (auto& [name, vals] : by_sector) {
        SectorPosterior sp;
        sp.n_obs = static_cast<Index>(vals.size());
        if (sp.n_obs > 0) {
            double s = 0.0;
            for (double v : vals) s += v;
            sp.sample_mean = s / static_cast<double>(vals.size());
            for (double v : vals) within_ss += (v - sp.sample_mean) * (v - sp.sample_mean);
            ++observed_sectors;
        }
        fit.sectors[name] = sp;
    }

    const double df = N - static_cast<double>(observed_sectors);
    if (df > 0.0) {
        fit.pooled_var = within_ss / df;
    } else if (log_values.size() >= 2) {
        double ss = 0.0;
        for (double v : log_values) ss += (v - fit.global_mean) * (v - fit.global_mean);
        fit.pooled_var = ss / (N - 1.0);
    } else {
        fit.pooled_var = 1.0;
    }
    fit.pooled_var = std::max(fit.pooled_var, kVarianceFloor);

    for (auto& [name, sp] : fit.sectors) {
        if (sp.n_obs >= 3) {
            double ss = 0.0;
            for (double v : by_sector[name]) ss += (v - sp.sample_mean) * (v - sp.sample_mean);
            sp.within_var = std::max(ss / static_cast<double>(sp.n_obs - 1), kVarianceFloor);
        } else {
            sp.within_var = fit.pooled_var;
        }
    }

    if (observed_sectors >= 2) {
        double mean_of_means = 0.0;
        double sampling_noise = 0.0;
        for (const auto& [name, sp] : fit.sectors)
            if (sp.n_obs > 0) {
                mean_of_means += sp.sample_mean;
                sampling_noise += sp.within_var / static_cast<double>(sp.n_obs);
            }
        const double k = static_cast<double>(observed_sectors);
        mean_of_means /= k;
        sampling_noise /= k;
        double spread = 0.0;
        for (const auto& [name, sp] : fit.sectors)
            if (sp.n_obs > 0) spread += (sp.sample_mean - mean_of_means) * (sp.sample_mean - mean_of_means);
        spread /= (k - 1.0);
        fit.prior_var = std::max(spread - sampling_noise, kVarianceFloor);
    } else {
        fit.prior_var = fit.pooled_var;
    }

    for (auto& [name, sp] : fit.sectors) {
        if (sp.n_obs == 0) {
            sp.within_var = fit.pooled_var;
            sp.post_mean = fit.global_mean;
            sp.post_var = fit.prior_var;
            continue;
        }
        const double data_prec = static_cast<double>(sp.n_obs) / sp.within_var;
        const double prec = 1.0 / fit.prior_var + data_prec;
        sp.post_mean = (fit.global_mean / fit.prior_var + data_prec * sp.sample_mean) / prec;
        sp.post_var = 1.0 / prec;
    }
    return fit;
}

/// K completed cross-sections. Row k of each matrix is draw k.
struct ImputationDraws {
    int k = 0;
    std::vector<std::string> tickers;
    Matrix emissions;   // K x n, tCO2e
    Matrix revenue_usd; // K x n
    Matrix intensity;   // K x n, tCO2e per $mm
    std::vector<bool> emissions_imputed;
    std::vector<bool> revenue_imputed;
    HierarchicalFit emissions_fit;
    HierarchicalFit revenue_fit;
};

/// Imputes missing emissions and revenues from their sector posteriors
/// (draw k uses seed + k). Observed values pass through unchanged.
inline ImputationDraws impute_emissions(const std::vector<FirmRecord>& raw,
                                        const std::map<std::string, std::string>& sectors, int k,
                                        std::uint64_t seed) {
    if (k < 1) throw InvalidInput("impute_emissions: K must be >= 1");
    const Index n = static_cast<Index>(raw.size());
    if (n == 0) throw InsufficientData("impute_emissions: empty cross-section");

    std::vector<std::string> firm_sector(raw.size());
    std::vector<std::string> all_sectors;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto it = sectors.find(raw[i].ticker);
        if (it == sectors.end()) throw InvalidInput("impute_emissions: no sector for " + raw[i].ticker);
        firm_sector[i] = it->second;
        all_sectors.push_back(it->second);
    }

    std::vector<double> log_c, log_s;
    std::vector<std::string> sec_c, sec_s;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i].emissions) {
            if (!(*raw[i].emissions >= 0.0) || !std::isfinite(*raw[i].emissions))
                throw InvalidInput("impute_emissions: observed emissions must be >= 0 for " + raw[i].ticker);
            // Zero emitters pass through but carry no information on the log scale.
            if (*raw[i].emissions > 0.0) {
                log_c.push_back(std::log(*raw[i].emissions));
                sec_c.push_back(firm_sector[i]);
            }
        }
        if (raw[i].revenue_usd) {
            if (!(*raw[i].revenue_usd > 0.0) || !std::isfinite(*raw[i].revenue_usd))
                throw InvalidInput("impute_emissions: observed revenue must be > 0 for " + raw[i].ticker);
            log_s.push_back(std::log(*raw[i].revenue_usd));
            sec_s.push_back(firm_sector[i]);
        }
    }
    if (log_c.empty()) throw InsufficientData("impute_emissions: no observed positive emissions in the cross-section");
    if (log_s.empty()) throw InsufficientData("impute_emissions: no observed revenues in the cross-section");

    ImputationDraws out;
    out.k = k;
    out.emissions_fit = fit_hierarchical(log_c, sec_c, all_sectors);
    out.revenue_fit = fit_hierarchical(log_s, sec_s, all_sectors);
    out.emissions = Matrix(k, n);
    out.revenue_usd = Matrix(k, n);
    out.intensity = Matrix(k, n);
    out.emissions_imputed.assign(raw.size(), false);
    out.revenue_imputed.assign(raw.size(), false);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out.tickers.push_back(raw[i].ticker);
        out.emissions_imputed[i] = !raw[i].emissions.has_value();
        out.revenue_imputed[i] = !raw[i].revenue_usd.has_value();
    }

    std::vector<std::string> sector_order;
    for (const auto& [name, sp] : out.emissions_fit.sectors) sector_order.push_back(name);

    for (int draw = 0; draw < k; ++draw) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(draw));
        std::normal_distribution<double> gauss(0.0, 1.0);

        // One posterior draw of each sector location, shared by the sector's firms.
        std::map<std::string, double> eta, zeta;
        for (const auto& name : sector_order) {
            const auto pc = out.emissions_fit.posterior(name);
            const auto ps = out.revenue_fit.posterior(name);
            eta[name] = pc.post_mean + std::sqrt(pc.post_var) * gauss(rng);
            zeta[name] = ps.post_mean + std::sqrt(ps.post_var) * gauss(rng);
        }
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const auto& sec = firm_sector[i];
            double c = 0.0;
            double s = 0.0;
            if (raw[i].emissions) {
                c = *raw[i].emissions;
            } else {
                const auto pc = out.emissions_fit.posterior(sec);
                c = std::exp(eta[sec] + std::sqrt(pc.within_var) * gauss(rng));
            }
            if (raw[i].revenue_usd) {
                s = *raw[i].revenue_usd;
            } else {
                const auto ps = out.revenue_fit.posterior(sec);
                s = std::exp(zeta[sec] + std::sqrt(ps.within_var) * gauss(rng));
            }
            const Index col = static_cast<Index>(i);
            out.emissions(draw, col) = c;
            out.revenue_usd(draw, col) = s;
            out.intensity(draw, col) = revenue_intensity(c, s);
        }
    }
    return out;
}

/// Elementwise mean of the K intensity draws.
inline Vector average_imputations(const ImputationDraws& draws) {
    if (draws.k < 1 || draws.intensity.rows() < 1) throw InvalidInput("average_imputations: need K >= 1");
    return draws.intensity.colwise().mean().transpose();
}

} // namespace eapo
