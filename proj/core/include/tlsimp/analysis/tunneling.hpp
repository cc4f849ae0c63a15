#pragma once

#include <span>

#include <Eigen/Dense>

namespace tlsimp::analysis {

struct QiPoint {
    double photons = 0.0;
    double q_i = 0.0;
};

struct TunnelingParameters {
    double f_delta0_tls = 0.0;
    double n_c = 1.0;
    double beta = 0.5;
    double delta0 = 0.0;
};

/// 1/Q_i = F d0_TLS tanh(h f_r / 2 k_B T) / (1 + n/n_c)^beta + delta0.
[[nodiscard]] double tunneling_loss(const TunnelingParameters& p, double photons, double f_r_hz,
                                    double temperature_k);

enum class Weighting {
    /// sigma_i proportional to 1/Q_i, scaled by the scatter of neighbouring
    /// points in log space.
    local_scatter,
    unweighted,
};

struct TunnelingFitResult {
    double f_delta0_tls = 0.0;
    double n_c = 0.0;
    double beta = 0.0;
    double delta0 = 0.0;
    bool beta_free = false;
    /// Order: F d0_TLS, n_c, beta, delta0. Row and column of a fixed beta are 0.
    Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();
    /// Weighted sum of squared residuals.
    double chi2 = 0.0;
    /// RMS of (model - data)/data.
    double rms_relative = 0.0;
    double thermal_factor = 1.0;
    int iterations = 0;

    [[nodiscard]] TunnelingParameters parameters() const { return {f_delta0_tls, n_c, beta, delta0}; }
};

/// Weighted nonlinear least squares of 1/Q_i versus photon number. beta is
/// fixed at 0.5 unless fit_beta is set. Needs at least five points spanning
/// two decades.
[[nodiscard]] TunnelingFitResult fit_tunneling_model(std::span<const QiPoint> points, double f_r_hz,
                                                     double temperature_k = 0.010, bool fit_beta = true,
                                                     Weighting weighting = Weighting::local_scatter);

}  // namespace tlsimp::analysis
