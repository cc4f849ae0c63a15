#include "tlsimp/physics.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "tlsimp/errors.hpp"

namespace tlsimp {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

bool finite_all(std::initializer_list<double> xs) {
    for (double x : xs) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace

void ResonatorModel::validate() const {
    require(finite_all({f0_hz, kappa0_hz, kappa_ext_hz, kappa_tls_hz, a_c, beta}),
            "resonator model: non-finite parameter");
    require(f0_hz > 0.0, "resonator model: f0 must be positive");
    require(kappa0_hz >= 0.0 && kappa_ext_hz >= 0.0 && kappa_tls_hz >= 0.0,
            "resonator model: rates must be non-negative");
    require(a_c > 0.0, "resonator model: a_c must be positive");
    require(beta >= 0.0 && beta <= 1.0, "resonator model: beta must lie in [0, 1]");
}

void DriveComb::validate() const {
    require(finite_all({f_center_hz, delta_hz, amplitude, phase1, phase2}), "drive: non-finite parameter");
    require(delta_hz > 0.0, "drive: delta must be positive");
    require(amplitude >= 0.0, "drive: amplitude must be non-negative");
}

DetectionComb DetectionComb::for_drive(const DriveComb& drive, int n_tones) {
    return DetectionComb{drive.f_center_hz, 0.5 * drive.delta_hz, n_tones};
}

void DetectionComb::validate() const {
    require(std::isfinite(f_center_hz) && std::isfinite(spacing_hz), "detection comb: non-finite parameter");
    require(spacing_hz > 0.0, "detection comb: spacing must be positive");
    require(n_tones >= 3 && n_tones % 2 == 1, "detection comb: n_tones must be odd and >= 3");
}

std::vector<double> DetectionComb::frequencies() const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n_tones));
    for (int m = -half_width(); m <= half_width(); ++m) out.push_back(frequency(m));
    return out;
}

void PhotonCalibration::validate() const {
    require(finite_all({z0_ohm, zr_ohm, q_l, q_c_mag, p_in_w, f_r_hz}), "photon calibration: non-finite field");
    require(z0_ohm > 0.0 && zr_ohm > 0.0 && q_l > 0.0 && q_c_mag > 0.0 && f_r_hz > 0.0,
            "photon calibration: impedances, quality factors and frequency must be positive");
    require(p_in_w >= 0.0, "photon calibration: power must be non-negative");
}

double tls_damping_rate(const ResonatorModel& model, double amp) {
    if (!(amp >= 0.0)) throw ValidationError("tls_damping_rate: amplitude must be non-negative");
    const double x = amp / model.a_c;
    return model.kappa_tls_hz * std::pow(1.0 + x * x, -model.beta);
}

std::vector<double> damping_taylor_coefficients(const ResonatorModel& model, int order) {
    if (order < 1) throw ValidationError("damping_taylor_coefficients: order must be >= 1");
    std::vector<double> c(static_cast<std::size_t>(order), 0.0);
    // (1 + x)^(-beta) = sum_m binom(-beta, m) x^m with x = |a|^2 / a_c^2.
    double binom = 1.0;
    double inv_ac2_pow = 1.0;
    const double inv_ac2 = 1.0 / (model.a_c * model.a_c);
    for (int n = 1; n <= order; n += 2) {
        const int m = (n - 1) / 2;
        if (m > 0) {
            binom *= (-model.beta - (m - 1)) / m;
            inv_ac2_pow *= inv_ac2;
        }
        c[static_cast<std::size_t>(n - 1)] = kPi * model.kappa_tls_hz * binom * inv_ac2_pow;
    }
    c[0] += kPi * (model.kappa0_hz + model.kappa_ext_hz);
    return c;
}

ImpFrequency imp_frequency(double f1_hz, double f2_hz, int k1, int k2) {
    if (k1 == 0 && k2 == 0) throw ValidationError("imp_frequency: (k1, k2) = (0, 0) is not a mixing product");
    return ImpFrequency{k1 * f1_hz + k2 * f2_hz, std::abs(k1) + std::abs(k2)};
}

double photon_number(const PhotonCalibration& cal) {
    cal.validate();
    const double omega = kTwoPi * cal.f_r_hz;
    return (cal.z0_ohm / cal.zr_ohm) * (cal.q_l * cal.q_l / cal.q_c_mag) * 2.0 * cal.p_in_w /
           (constants::kHbar * omega * omega);
}

double input_photon_flux(double p_in_w, double f_hz) {
    if (!(p_in_w >= 0.0) || !(f_hz > 0.0)) throw ValidationError("input_photon_flux: invalid power or frequency");
    return p_in_w / (2.0 * constants::kHbar * kTwoPi * f_hz);
}

Complex steady_state_amplitude_linear(const ResonatorModel& model, double drive_freq_hz, Complex drive_amp) {
    const Complex denom{kPi * model.kappa_total_hz(), kTwoPi * (drive_freq_hz - model.f0_hz)};
    return -std::sqrt(kTwoPi * model.kappa_ext_hz) * drive_amp / denom;
}

double drive_for_photon_number(const ResonatorModel& model, double photons) {
    if (!(photons >= 0.0)) throw ValidationError("drive_for_photon_number: photon number must be non-negative");
    if (!(model.kappa_ext_hz > 0.0)) throw ValidationError("drive_for_photon_number: kappa_ext must be positive");
    return std::sqrt(photons) * kPi * model.kappa_total_hz() / std::sqrt(kTwoPi * model.kappa_ext_hz);
}

}  // namespace tlsimp
