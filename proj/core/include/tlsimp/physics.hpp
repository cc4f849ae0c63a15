#pragma once

#include <complex>
#include <numbers>
#include <vector>

namespace tlsimp {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

namespace constants {
// CODATA 2018, exact or to full double precision.
inline constexpr double kPlanck = 6.62607015e-34;         // J s
inline constexpr double kHbar = 1.054571817e-34;          // J s
inline constexpr double kBoltzmann = 1.380649e-23;        // J / K
}  // namespace constants

/// Lumped parameters of a resonator with saturable TLS damping.
///
/// All rates are linewidth contributions in Hz; the factor 2*pi is applied
/// inside the operations that need angular units. Amplitudes are normalised
/// so that |a|^2 is the intra-cavity photon number, which makes a_c^2 the
/// critical photon number.
struct ResonatorModel {
    double f0_hz = 0.0;
    double kappa0_hz = 0.0;
    double kappa_ext_hz = 0.0;
    double kappa_tls_hz = 0.0;
    double a_c = 1.0;
    double beta = 0.5;

    /// Throws ValidationError when an invariant is broken.
    void validate() const;

    /// Zero-power total linewidth kappa0 + kappa_ext + kappa_tls.
    [[nodiscard]] double kappa_total_hz() const noexcept {
        return kappa0_hz + kappa_ext_hz + kappa_tls_hz;
    }
};

/// Two drive tones at f_center -/+ delta/2 with a common amplitude in
/// sqrt(photons/s).
struct DriveComb {
    double f_center_hz = 0.0;
    double delta_hz = 100.0;
    double amplitude = 0.0;
    double phase1 = 0.0;
    double phase2 = 0.0;

    void validate() const;

    [[nodiscard]] double f1_hz() const noexcept { return f_center_hz - 0.5 * delta_hz; }
    [[nodiscard]] double f2_hz() const noexcept { return f_center_hz + 0.5 * delta_hz; }
};

/// Odd number of demodulation frequencies f_center + m*spacing,
/// m in [-(n_tones-1)/2, (n_tones-1)/2].
struct DetectionComb {
    double f_center_hz = 0.0;
    double spacing_hz = 50.0;
    int n_tones = 31;

    /// Comb with spacing delta/2 centred on the drive pair.
    static DetectionComb for_drive(const DriveComb& drive, int n_tones);

    void validate() const;

    [[nodiscard]] int half_width() const noexcept { return (n_tones - 1) / 2; }
    [[nodiscard]] double frequency(int m) const noexcept { return f_center_hz + m * spacing_hz; }
    /// Position of comb index m in frequency order.
    [[nodiscard]] std::size_t position(int m) const noexcept {
        return static_cast<std::size_t>(m + half_width());
    }
    [[nodiscard]] std::vector<double> frequencies() const;
    /// Comb period 1/spacing in seconds.
    [[nodiscard]] double period_s() const noexcept { return 1.0 / spacing_hz; }
};

/// Inputs of the circulating photon number estimate.
struct PhotonCalibration {
    double z0_ohm = 50.0;
    double zr_ohm = 50.0;
    double q_l = 0.0;
    double q_c_mag = 0.0;
    double p_in_w = 0.0;
    double f_r_hz = 0.0;

    void validate() const;
};

/// kappa_TLS / [1 + (amp/a_c)^2]^beta, in Hz.
[[nodiscard]] double tls_damping_rate(const ResonatorModel& model, double amp);

/// Power-series coefficients c_1..c_N of the angular half-rate
/// pi*[kappa0 + kappa_ext + kappa_TLS(|a|)] in powers |a|^(n-1).
/// Entries for even n are exactly zero. Element i holds c_{i+1}.
[[nodiscard]] std::vector<double> damping_taylor_coefficients(const ResonatorModel& model, int order);

struct ImpFrequency {
    double f_hz = 0.0;
    int order = 0;
};

/// Intermodulation product k1*f1 + k2*f2 and its order |k1| + |k2|.
[[nodiscard]] ImpFrequency imp_frequency(double f1_hz, double f2_hz, int k1, int k2);

/// Average circulating photon number for a notch-coupled resonator.
[[nodiscard]] double photon_number(const PhotonCalibration& cal);

/// Drive photon flux |a_in|^2 (photons/s) seen by the single-port model for
/// a power p_in_w incident on a notch-coupled resonator. The side-coupled
/// geometry splits kappa_ext between the two line directions, which halves
/// the effective flux compared with P/(hbar*omega).
[[nodiscard]] double input_photon_flux(double p_in_w, double f_hz);

/// Linear steady state of a single drive tone, sqrt(photons).
[[nodiscard]] Complex steady_state_amplitude_linear(const ResonatorModel& model, double drive_freq_hz,
                                                    Complex drive_amp);

/// Real drive amplitude whose on-resonance linear response (zero-power
/// linewidth, TLS loss included) holds `photons` in the resonator.
[[nodiscard]] double drive_for_photon_number(const ResonatorModel& model, double photons);

}  // namespace tlsimp
