#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tlsimp/physics.hpp"
#include "tlsimp/spectrum.hpp"

namespace tlsimp::recon {

/// One measured tone of a partial spectrum.
struct SpectralTone {
    double freq_hz = 0.0;
    /// (freq - frame)/spacing, an integer on the comb lattice.
    int index = 0;
    /// Angular frequency in the rotating frame, rad/s.
    double omega = 0.0;
    Complex intracavity;
    Complex drive;
};

/// The tones retained for a harmonic-balance fit.
struct PartialSpectrum {
    double frame_hz = 0.0;
    double spacing_hz = 0.0;
    std::vector<SpectralTone> tones;

    /// Distinct frequencies, at least one drive tone, and at least four tones
    /// when `nonlinear` is set.
    void validate(bool nonlinear) const;
    [[nodiscard]] int max_abs_index() const;
};

/// Which comb tones enter the fit: every driven tone, then the strongest
/// remaining tones whose amplitude is at least `min_relative_amplitude` of
/// the strongest response, up to `max_tones` in total.
struct ToneSelection {
    std::size_t max_tones = 16;
    double min_relative_amplitude = 1e-9;
};

/// A_k = (a_out,k - a_in,k)/sqrt(2*pi*kappa_ext_guess) on the selected tones.
[[nodiscard]] PartialSpectrum intracavity_from_output(const ComplexSpectrum& output, const ComplexSpectrum& drive_in,
                                                      double kappa_ext_guess_hz, const ToneSelection& selection = {});

/// Partial spectrum from a known intra-cavity spectrum.
[[nodiscard]] PartialSpectrum partial_from_intracavity(const ComplexSpectrum& intracavity,
                                                       const ComplexSpectrum& drive_in,
                                                       const ToneSelection& selection = {});

/// Fourier component at tone k of |a(t)|^(n-1) a(t), where a(t) is
/// synthesised from the spectrum over one comb period. The quadrature grid
/// is checked against a grid twice as dense.
[[nodiscard]] Complex nonlinear_fourier_component(const PartialSpectrum& spec, int n, std::size_t k,
                                                  int oversample = 8);

/// Harmonic-balance design matrix and right-hand side.
struct HMatrix {
    /// Rows: tones. Columns: i*w_k*A_k, i*A_k, A_k, F{|a|^(n-1) a}_k ...
    Eigen::MatrixXcd h;
    /// A_in,k for each row.
    Eigen::VectorXcd drive;
    /// Power n of each column from the third on (first entry is 1).
    std::vector<int> powers;
    int order = 1;
    double frame_hz = 0.0;
    /// max |a(t)| over the synthesised period.
    double max_amplitude = 0.0;
};

[[nodiscard]] HMatrix build_h_matrix(const PartialSpectrum& spec, int order, bool odd_only = true,
                                     int oversample = 8);

struct ParameterSolution {
    double kappa_ext_hz = 0.0;
    double f0_hz = 0.0;
    /// c_1..c_N (element i holds c_{i+1}); columns left out of the fit are 0.
    std::vector<double> c;
    std::vector<int> powers;
    /// ||H p + A_in|| / ||A_in||.
    double residual_norm = 0.0;
    /// Of the column-normalised real system.
    double condition_number = 0.0;
    std::vector<double> singular_values;
};

/// Real parameter vector p minimising ||H p + A_in|| via an SVD
/// pseudo-inverse of the column-normalised, real-stacked system. Singular
/// values below cutoff*sigma_max are a rank deficiency and raise
/// NumericalError listing the singular spectrum.
[[nodiscard]] ParameterSolution solve_parameters(const HMatrix& hm, double cutoff = 1e-10);

/// (2/(2*pi)) sum c_n amp^(n-1) - kappa0 - kappa_ext, in Hz.
[[nodiscard]] double reconstructed_tls_rate(const std::vector<double>& c, double kappa0_hz, double kappa_ext_hz,
                                            double amp);

struct TlsFit {
    double kappa_tls_hz = 0.0;
    double a_c = 0.0;
    double beta = 0.0;
    bool beta_fitted = false;
    /// RMS of the rate residual over the amplitude grid, Hz.
    double rms_residual_hz = 0.0;
    std::string warning;
};

/// Least-squares fit of kappa_TLS/[1+(amp/a_c)^2]^beta to the reconstructed
/// rate on `grid_points` amplitudes spanning [0, max_amplitude].
[[nodiscard]] TlsFit fit_tls_damping(const std::vector<double>& c, double kappa0_hz, double kappa_ext_hz,
                                     double beta_fixed, double max_amplitude, bool fit_beta = false,
                                     int grid_points = 201);

struct ReconstructionOptions {
    int order = 9;
    bool odd_only = true;
    double cutoff = 1e-10;
    int oversample = 8;
    double kappa0_fixed_hz = 860.0;
    double beta_fixed = 0.3;
    bool fit_beta = false;
    bool two_pass = true;
    ToneSelection selection;
    int curve_points = 101;
};

struct ReconstructionResult {
    double kappa_ext_hz = 0.0;
    double f0_hz = 0.0;
    std::vector<double> c;
    double kappa_tls_hz = 0.0;
    double a_c = 0.0;
    double beta = 0.0;
    bool beta_fitted = false;
    double residual_norm = 0.0;
    double condition_number = 0.0;
    std::vector<double> singular_values;
    double max_amplitude = 0.0;
    std::size_t tones_used = 0;
    /// kappa_ext from the first pass, before the self-consistent rescale.
    double kappa_ext_first_pass_hz = 0.0;
    double tls_fit_rms_hz = 0.0;
    std::string warning;
    /// Sampled reconstructed TLS rate and the fitted model, Hz.
    std::vector<double> curve_amplitude;
    std::vector<double> curve_reconstructed_hz;
    std::vector<double> curve_model_hz;
};

/// Harmonic balance on an already intra-cavity partial spectrum.
[[nodiscard]] ReconstructionResult reconstruct_partial(const PartialSpectrum& spec,
                                                       const ReconstructionOptions& opts = {});

/// Full pipeline from an output spectrum. With two_pass set, the first pass
/// uses kappa_ext_guess_hz; because rescaling A_k by s rescales the
/// recovered kappa_ext by s^2, the self-consistent value is
/// sqrt(guess * first_pass), which seeds the second pass.
[[nodiscard]] ReconstructionResult reconstruct(const ComplexSpectrum& output, const ComplexSpectrum& drive_in,
                                               double kappa_ext_guess_hz, const ReconstructionOptions& opts = {});

}  // namespace tlsimp::recon
