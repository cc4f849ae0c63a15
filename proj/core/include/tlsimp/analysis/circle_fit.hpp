#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "tlsimp/physics.hpp"

namespace tlsimp::analysis {

/// Complex transmission of a notch resonator versus probe frequency.
struct S21Trace {
    std::vector<double> frequencies_hz;
    std::vector<Complex> s21;
    double power_dbm = std::numeric_limits<double>::quiet_NaN();
    double temperature_k = std::numeric_limits<double>::quiet_NaN();

    /// Equal lengths, at least 20 strictly increasing finite frequencies.
    void validate() const;
};

/// S21(f) = a e^{i alpha} e^{-i 2 pi f tau}
///          [1 - (Q_l/|Q_c|) e^{i phi} / (1 + 2 i Q_l (f/f_r - 1))].
struct NotchParameters {
    double a = 1.0;
    double alpha = 0.0;
    double tau_s = 0.0;
    double f_r_hz = 0.0;
    double q_l = 0.0;
    double q_c_mag = 0.0;
    double phi = 0.0;

    [[nodiscard]] Complex s21(double f_hz) const;
};

struct CircleFitOptions {
    /// Fraction of points on each side used for the initial delay estimate.
    double delay_window = 0.2;
};

struct CircleFitResult {
    NotchParameters params;
    double q_i = 0.0;
    /// RMS of |S21 - model| over the trace.
    double rms_residual = 0.0;
    double circle_radius = 0.0;
    /// RMS distance of the delay-corrected points from the fitted circle.
    double circle_scatter = 0.0;
    /// Radius smaller than five times the scatter.
    bool ill_conditioned = false;
};

/// Circle fit with diameter correction: cable delay from the off-resonant
/// phase (refined so the points lie on a circle), algebraic circle fit,
/// phase-versus-frequency fit for f_r and Q_l, normalisation by the
/// off-resonant point for |Q_c| and phi, then a joint refinement of all
/// seven parameters.
[[nodiscard]] CircleFitResult circle_fit(const S21Trace& trace, const CircleFitOptions& opts = {});

/// Samples the notch model on `points` equally spaced frequencies. Complex
/// Gaussian noise of total standard deviation noise_std is added.
[[nodiscard]] S21Trace generate_s21(const NotchParameters& params, double f_start_hz, double f_stop_hz, int points,
                                    double noise_std = 0.0, std::uint64_t seed = 0);

/// 1/Q_i = 1/Q_l - Re{e^{-i phi}}/|Q_c|. Throws ValidationError when the
/// result is not positive.
[[nodiscard]] double qi_from_ql(double q_l, double q_c_mag, double phi);

/// Inverse of qi_from_ql.
[[nodiscard]] double ql_from_qi(double q_i, double q_c_mag, double phi);

}  // namespace tlsimp::analysis
