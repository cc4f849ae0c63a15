#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "tlsimp/physics.hpp"
#include "tlsimp/spectrum.hpp"

namespace tlsimp {

/// Integration and demodulation settings for one two-tone run.
struct SimulationConfig {
    /// Rotating-frame reference; defaults to the drive centre.
    std::optional<double> frame_hz;
    /// Comb periods (1/spacing) integrated before the first measurement.
    int transient_periods = 20;
    /// Comb periods per demodulation window.
    int measure_periods = 1;
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    /// Upper bound on the integrator step; 0 leaves it unbounded.
    double max_step_s = 0.0;
    int samples_per_period = 1024;
    /// Extra windows allowed while waiting for the steady-state check to pass.
    int max_settle_windows = 40;
    /// Relative window-to-window change tolerated at the drive tones.
    double steady_state_tol = 1e-4;
    /// Standard deviation of complex Gaussian noise added to the output
    /// spectrum, sqrt(photons/s); each quadrature gets noise_amplitude/sqrt(2).
    double noise_amplitude = 0.0;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct IntegratorStats {
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
    double simulated_s = 0.0;
    /// Measurement windows integrated, including the reported one.
    int windows = 0;
    /// Relative change at the drive tones between the last two windows.
    double steady_state_change = 0.0;
};

/// Steady-state response to a two-tone drive, all on the detection comb in
/// the simulation's rotating frame.
struct TwoToneResponse {
    ComplexSpectrum intracavity;
    ComplexSpectrum drive;
    ComplexSpectrum output;
    IntegratorStats stats;
};

/// Drive amplitudes on the detection comb: A*exp(i*phase) at the two drive
/// tones, zero elsewhere.
[[nodiscard]] ComplexSpectrum drive_spectrum(const DriveComb& drive, const DetectionComb& comb, double frame_hz);

/// Integrates da/dt = i*dw*a - pi*(kappa0 + kappa_ext + kappa_TLS(|a|))*a
///                   - sqrt(2*pi*kappa_ext)*a_in(t)
/// in the frame rotating at cfg.frame_hz (dw = 2*pi*(f0 - frame)), discards
/// the transient and demodulates consecutive windows until they agree.
///
/// Throws NumericalError when the integrator fails or the response does not
/// settle within cfg.max_settle_windows.
[[nodiscard]] TwoToneResponse simulate_two_tone(const ResonatorModel& model, const DriveComb& drive,
                                                const DetectionComb& comb, const SimulationConfig& cfg);

/// a_out = sqrt(2*pi*kappa_ext)*A + a_in, elementwise.
[[nodiscard]] ComplexSpectrum output_field(const ComplexSpectrum& intracavity, const ComplexSpectrum& drive_in,
                                           double kappa_ext_hz);

}  // namespace tlsimp
