#include "tlsimp/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>

#include "least_squares.hpp"
#include "tlsimp/errors.hpp"

namespace tlsimp::recon {

namespace {

constexpr double kAliasTolerance = 1e-9;

/// Uniform quadrature over one comb period with M points.
class PeriodGrid {
public:
    explicit PeriodGrid(std::size_t points) : roots_(points) {
        for (std::size_t j = 0; j < points; ++j)
            roots_[j] = std::polar(1.0, kTwoPi * static_cast<double>(j) / static_cast<double>(points));
    }

    [[nodiscard]] std::size_t size() const noexcept { return roots_.size(); }

    /// exp(i*2*pi*index*j/M).
    [[nodiscard]] Complex phasor(int index, std::size_t j) const {
        const auto m = static_cast<std::int64_t>(roots_.size());
        std::int64_t r = (static_cast<std::int64_t>(index) * static_cast<std::int64_t>(j)) % m;
        if (r < 0) r += m;
        return roots_[static_cast<std::size_t>(r)];
    }

    [[nodiscard]] std::vector<Complex> synthesize(const PartialSpectrum& spec) const {
        std::vector<Complex> a(size());
        for (std::size_t j = 0; j < size(); ++j) {
            Complex acc{0.0, 0.0};
            for (const auto& tone : spec.tones) acc += tone.intracavity * phasor(tone.index, j);
            a[j] = acc;
        }
        return a;
    }

    /// Components of |a|^(n-1) a at every tone of spec.
    [[nodiscard]] Eigen::VectorXcd project_power(const PartialSpectrum& spec, const std::vector<Complex>& a,
                                                 int n) const {
        std::vector<Complex> g(size());
        for (std::size_t j = 0; j < size(); ++j) {
            const double mag = std::abs(a[j]);
            g[j] = (n == 1 ? 1.0 : std::pow(mag, n - 1)) * a[j];
        }
        Eigen::VectorXcd out(static_cast<Eigen::Index>(spec.tones.size()));
        for (std::size_t k = 0; k < spec.tones.size(); ++k) {
            Complex acc{0.0, 0.0};
            for (std::size_t j = 0; j < size(); ++j) acc += g[j] * std::conj(phasor(spec.tones[k].index, j));
            out[static_cast<Eigen::Index>(k)] = acc / static_cast<double>(size());
        }
        return out;
    }

private:
    std::vector<Complex> roots_;
};

std::size_t grid_points(const PartialSpectrum& spec, int n, int oversample) {
    const auto span = static_cast<std::size_t>(2 * spec.max_abs_index() + 1);
    return static_cast<std::size_t>(oversample) * static_cast<std::size_t>(std::max(n, 2)) * span;
}

double amplitude_scale(const PartialSpectrum& spec, int n) {
    double sum = 0.0;
    for (const auto& t : spec.tones) sum += std::abs(t.intracavity);
    return std::pow(sum, n);
}

/// Column of F{|a|^(n-1) a} for every tone, verified against a doubled grid.
Eigen::VectorXcd checked_column(const PartialSpectrum& spec, int n, int oversample, double* max_amplitude) {
    const std::size_t m = grid_points(spec, n, oversample);
    const PeriodGrid coarse(m);
    const PeriodGrid fine(2 * m);
    const auto a_coarse = coarse.synthesize(spec);
    const auto a_fine = fine.synthesize(spec);
    const Eigen::VectorXcd c1 = coarse.project_power(spec, a_coarse, n);
    const Eigen::VectorXcd c2 = fine.project_power(spec, a_fine, n);
    const double diff = (c1 - c2).cwiseAbs().maxCoeff();
    const double scale = amplitude_scale(spec, n);
    if (diff > kAliasTolerance * scale) {
        std::ostringstream os;
        os << "nonlinear Fourier component for n = " << n << " changed by " << diff / scale
           << " (relative) when the quadrature grid was doubled from " << m << " points; raise oversample";
        throw NumericalError(os.str());
    }
    if (max_amplitude) {
        double mx = 0.0;
        for (const auto& v : a_fine) mx = std::max(mx, std::abs(v));
        *max_amplitude = mx;
    }
    return c2;
}

double infer_spacing(const ComplexSpectrum& s) {
    if (s.size() < 2) throw ValidationError("reconstruction: spectrum needs at least two frequencies");
    double spacing = s.frequency(1) - s.frequency(0);
    for (std::size_t i = 2; i < s.size(); ++i) spacing = std::min(spacing, s.frequency(i) - s.frequency(i - 1));
    return spacing;
}

PartialSpectrum select_tones(const ComplexSpectrum& drive_in, const std::vector<Complex>& response,
                             const std::vector<Complex>& intracavity, const ToneSelection& sel) {
    if (drive_in.frame().kind != Frame::Kind::rotating)
        throw ValidationError("reconstruction: spectra must be in a rotating frame");
    PartialSpectrum spec;
    spec.frame_hz = drive_in.frame().ref_hz;
    spec.spacing_hz = infer_spacing(drive_in);

    const std::size_t n = drive_in.size();
    double strongest = 0.0;
    for (const auto& r : response) strongest = std::max(strongest, std::abs(r));

    std::vector<std::size_t> driven;
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < n; ++i) {
        if (drive_in.amplitude(i) != Complex{0.0, 0.0})
            driven.push_back(i);
        else if (std::abs(response[i]) >= sel.min_relative_amplitude * strongest)
            others.push_back(i);
    }
    if (driven.empty()) throw ValidationError("reconstruction: no driven tone in the spectrum");
    std::stable_sort(others.begin(), others.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(response[a]) > std::abs(response[b]); });

    std::vector<std::size_t> keep = driven;
    for (std::size_t i : others) {
        if (keep.size() >= sel.max_tones) break;
        keep.push_back(i);
    }
    std::sort(keep.begin(), keep.end());

    for (std::size_t i : keep) {
        SpectralTone t;
        t.freq_hz = drive_in.frequency(i);
        const double idx = (t.freq_hz - spec.frame_hz) / spec.spacing_hz;
        if (std::abs(idx - std::round(idx)) > 1e-6)
            throw ValidationError("reconstruction: tone is not on the comb lattice of the frame");
        t.index = static_cast<int>(std::lround(idx));
        t.omega = kTwoPi * (t.freq_hz - spec.frame_hz);
        t.intracavity = intracavity[i];
        t.drive = drive_in.amplitude(i);
        spec.tones.push_back(t);
    }
    return spec;
}

}  // namespace

void PartialSpectrum::validate(bool nonlinear) const {
    if (!(spacing_hz > 0.0)) throw ValidationError("partial spectrum: spacing must be positive");
    if (tones.empty()) throw ValidationError("partial spectrum: no tones");
    if (nonlinear && tones.size() < 4) throw ValidationError("partial spectrum: a nonlinear fit needs at least four tones");
    bool has_drive = false;
    for (std::size_t i = 0; i < tones.size(); ++i) {
        has_drive = has_drive || tones[i].drive != Complex{0.0, 0.0};
        for (std::size_t j = 0; j < i; ++j) {
            if (tones[j].index == tones[i].index) throw ValidationError("partial spectrum: duplicate tone frequency");
        }
    }
    if (!has_drive) throw ValidationError("partial spectrum: drive tones must be included");
}

int PartialSpectrum::max_abs_index() const {
    int mx = 0;
    for (const auto& t : tones) mx = std::max(mx, std::abs(t.index));
    return mx;
}

PartialSpectrum intracavity_from_output(const ComplexSpectrum& output, const ComplexSpectrum& drive_in,
                                        double kappa_ext_guess_hz, const ToneSelection& selection) {
    if (!(kappa_ext_guess_hz > 0.0)) throw ValidationError("intracavity_from_output: kappa_ext guess must be positive");
    if (!output.same_grid(drive_in)) throw ValidationError("intracavity_from_output: frame or frequency grid mismatch");
    const double coupling = std::sqrt(kTwoPi * kappa_ext_guess_hz);
    std::vector<Complex> response(output.size());
    std::vector<Complex> intracavity(output.size());
    for (std::size_t i = 0; i < output.size(); ++i) {
        response[i] = output.amplitude(i) - drive_in.amplitude(i);
        intracavity[i] = response[i] / coupling;
    }
    return select_tones(drive_in, response, intracavity, selection);
}

PartialSpectrum partial_from_intracavity(const ComplexSpectrum& intracavity, const ComplexSpectrum& drive_in,
                                         const ToneSelection& selection) {
    if (!intracavity.same_grid(drive_in))
        throw ValidationError("partial_from_intracavity: frame or frequency grid mismatch");
    std::vector<Complex> amps(intracavity.amplitudes().begin(), intracavity.amplitudes().end());
    return select_tones(drive_in, amps, amps, selection);
}

Complex nonlinear_fourier_component(const PartialSpectrum& spec, int n, std::size_t k, int oversample) {
    if (k >= spec.tones.size()) throw ValidationError("nonlinear_fourier_component: tone index out of range");
    if (n < 1) throw ValidationError("nonlinear_fourier_component: n must be >= 1");
    if (n == 1) return spec.tones[k].intracavity;
    if (oversample < 4) throw ValidationError("nonlinear_fourier_component: oversample must be >= 4");
    return checked_column(spec, n, oversample, nullptr)[static_cast<Eigen::Index>(k)];
}

HMatrix build_h_matrix(const PartialSpectrum& spec, int order, bool odd_only, int oversample) {
    if (order < 1) throw ValidationError("build_h_matrix: order must be >= 1");
    if (oversample < 4) throw ValidationError("build_h_matrix: oversample must be >= 4");
    spec.validate(false);

    HMatrix hm;
    hm.order = order;
    hm.frame_hz = spec.frame_hz;
    hm.powers.push_back(1);
    for (int n = 2; n <= order; ++n) {
        if (!odd_only || n % 2 == 1) hm.powers.push_back(n);
    }

    const auto rows = static_cast<Eigen::Index>(spec.tones.size());
    const auto cols = static_cast<Eigen::Index>(2 + hm.powers.size());
    hm.h.resize(rows, cols);
    hm.drive.resize(rows);
    const Complex i_unit{0.0, 1.0};
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& t = spec.tones[static_cast<std::size_t>(r)];
        hm.h(r, 0) = i_unit * t.omega * t.intracavity;
        hm.h(r, 1) = i_unit * t.intracavity;
        hm.h(r, 2) = t.intracavity;
        hm.drive[r] = t.drive;
    }
    double max_amp = 0.0;
    for (std::size_t c = 1; c < hm.powers.size(); ++c) {
        hm.h.col(static_cast<Eigen::Index>(2 + c)) = checked_column(spec, hm.powers[c], oversample, &max_amp);
    }
    if (hm.powers.size() == 1) {
        const PeriodGrid grid(grid_points(spec, 1, oversample));
        for (const auto& v : grid.synthesize(spec)) max_amp = std::max(max_amp, std::abs(v));
    }
    hm.max_amplitude = max_amp;
    return hm;
}

ParameterSolution solve_parameters(const HMatrix& hm, double cutoff) {
    const Eigen::Index rows = hm.h.rows();
    const Eigen::Index cols = hm.h.cols();
    if (rows < cols) {
        std::ostringstream os;
        os << "solve_parameters: " << rows << " tones cannot determine " << cols << " parameters";
        throw ValidationError(os.str());
    }
    if (!(cutoff > 0.0)) throw ValidationError("solve_parameters: cutoff must be positive");

    // Real unknowns: stack real and imaginary parts of every row.
    Eigen::MatrixXd a(2 * rows, cols);
    a.topRows(rows) = hm.h.real();
    a.bottomRows(rows) = hm.h.imag();
    Eigen::VectorXd b(2 * rows);
    b.head(rows) = -hm.drive.real();
    b.tail(rows) = -hm.drive.imag();

    Eigen::VectorXd scale = a.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < cols; ++j) {
        if (!(scale[j] > 0.0)) {
            std::ostringstream os;
            os << "solve_parameters: column " << j << " of H is identically zero";
            throw NumericalError(os.str());
        }
    }
    const Eigen::MatrixXd scaled = a * scale.cwiseInverse().asDiagonal();

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    ParameterSolution sol;
    sol.singular_values.assign(sv.data(), sv.data() + sv.size());
    const double smax = sv[0];
    const double smin = sv[sv.size() - 1];
    if (!(smin > cutoff * smax)) {
        std::ostringstream os;
        os << "solve_parameters: H is rank deficient at relative cutoff " << cutoff << "; singular values:";
        for (double s : sol.singular_values) os << ' ' << s;
        throw NumericalError(os.str());
    }
    sol.condition_number = smax / smin;

    Eigen::VectorXd inv = sv.cwiseInverse();
    const Eigen::VectorXd y = svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * b);
    const Eigen::VectorXd p = y.cwiseQuotient(scale);

    const double p0 = p[0];
    if (!(p0 > 0.0)) {
        std::ostringstream os;
        os << "solve_parameters: leading parameter 1/sqrt(kappa_ext) = " << p0 << " is not positive";
        throw NumericalError(os.str());
    }
    sol.kappa_ext_hz = 1.0 / (kTwoPi * p0 * p0);
    // The envelope rotates as exp(+i*w*t), so p1/p0 is minus the detuning.
    sol.f0_hz = hm.frame_hz - (p[1] / p0) / kTwoPi;
    sol.c.assign(static_cast<std::size_t>(hm.order), 0.0);
    for (std::size_t c = 0; c < hm.powers.size(); ++c)
        sol.c[static_cast<std::size_t>(hm.powers[c] - 1)] = p[static_cast<Eigen::Index>(2 + c)] / p0;
    sol.powers = hm.powers;

    const Eigen::VectorXcd resid = hm.h * p.cast<Complex>() + hm.drive;
    const double drive_norm = hm.drive.norm();
    sol.residual_norm = drive_norm > 0.0 ? resid.norm() / drive_norm : resid.norm();
    return sol;
}

double reconstructed_tls_rate(const std::vector<double>& c, double kappa0_hz, double kappa_ext_hz, double amp) {
    double sum = 0.0;
    double power = 1.0;
    for (double cn : c) {
        sum += cn * power;
        power *= amp;
    }
    return sum / kPi - kappa0_hz - kappa_ext_hz;
}

TlsFit fit_tls_damping(const std::vector<double>& c, double kappa0_hz, double kappa_ext_hz, double beta_fixed,
                       double max_amplitude, bool fit_beta, int grid_points) {
    if (c.empty()) throw ValidationError("fit_tls_damping: empty coefficient list");
    if (!(kappa0_hz >= 0.0)) throw ValidationError("fit_tls_damping: kappa0 must be non-negative");
    if (!(max_amplitude > 0.0)) throw ValidationError("fit_tls_damping: amplitude range must be positive");
    if (!(beta_fixed >= 0.0 && beta_fixed <= 1.0)) throw ValidationError("fit_tls_damping: beta must lie in [0, 1]");
    if (grid_points < 8) throw ValidationError("fit_tls_damping: need at least 8 grid points");

    const auto g = static_cast<std::size_t>(grid_points);
    std::vector<double> amp(g);
    std::vector<double> target(g);
    for (std::size_t i = 0; i < g; ++i) {
        amp[i] = max_amplitude * static_cast<double>(i) / static_cast<double>(g - 1);
        target[i] = reconstructed_tls_rate(c, kappa0_hz, kappa_ext_hz, amp[i]);
    }

    const double k_start = target[0] > 0.0 ? target[0] : std::max(*std::max_element(target.begin(), target.end()), 1.0);
    double ac_start = max_amplitude;
    const double half = k_start * std::pow(2.0, -beta_fixed);
    for (std::size_t i = 1; i < g; ++i) {
        if (target[i] <= half) {
            ac_start = std::max(amp[i], 1e-3 * max_amplitude);
            break;
        }
    }

    const detail::ResidualFn residual = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
        const double kt = std::exp(q[0]);
        const double ac = std::exp(q[1]);
        const double beta = fit_beta ? q[2] : beta_fixed;
        for (std::size_t i = 0; i < g; ++i) {
            const double x = amp[i] / ac;
            r[static_cast<Eigen::Index>(i)] = kt * std::pow(1.0 + x * x, -beta) - target[i];
        }
    };

    Eigen::VectorXd q0(fit_beta ? 3 : 2);
    q0[0] = std::log(k_start);
    q0[1] = std::log(ac_start);
    if (fit_beta) q0[2] = beta_fixed;

    const auto res = detail::levenberg_marquardt(residual, q0, static_cast<int>(g));
    if (!res.converged) throw NumericalError("fit_tls_damping: optimizer did not converge; " + res.describe());

    TlsFit fit;
    fit.kappa_tls_hz = std::exp(res.x[0]);
    fit.a_c = std::exp(res.x[1]);
    fit.beta = fit_beta ? res.x[2] : beta_fixed;
    fit.beta_fitted = fit_beta;
    fit.rms_residual_hz = res.norm / std::sqrt(static_cast<double>(g));
    if (fit_beta) {
        fit.warning = "beta and a_c are strongly correlated in a single spectrum; the joint estimate is poorly "
                      "constrained";
        if (fit.beta < 0.0 || fit.beta > 1.0) fit.warning += "; fitted beta lies outside [0, 1]";
    }
    return fit;
}

ReconstructionResult reconstruct_partial(const PartialSpectrum& spec, const ReconstructionOptions& opts) {
    spec.validate(opts.order > 1);
    const HMatrix hm = build_h_matrix(spec, opts.order, opts.odd_only, opts.oversample);
    const ParameterSolution sol = solve_parameters(hm, opts.cutoff);

    ReconstructionResult out;
    out.kappa_ext_hz = sol.kappa_ext_hz;
    out.kappa_ext_first_pass_hz = sol.kappa_ext_hz;
    out.f0_hz = sol.f0_hz;
    out.c = sol.c;
    out.residual_norm = sol.residual_norm;
    out.condition_number = sol.condition_number;
    out.singular_values = sol.singular_values;
    out.max_amplitude = hm.max_amplitude;
    out.tones_used = spec.tones.size();

    const TlsFit fit = fit_tls_damping(sol.c, opts.kappa0_fixed_hz, sol.kappa_ext_hz, opts.beta_fixed,
                                       hm.max_amplitude, opts.fit_beta);
    out.kappa_tls_hz = fit.kappa_tls_hz;
    out.a_c = fit.a_c;
    out.beta = fit.beta;
    out.beta_fitted = fit.beta_fitted;
    out.tls_fit_rms_hz = fit.rms_residual_hz;
    out.warning = fit.warning;

    const int pts = std::max(opts.curve_points, 2);
    for (int i = 0; i < pts; ++i) {
        const double x = hm.max_amplitude * i / (pts - 1);
        out.curve_amplitude.push_back(x);
        out.curve_reconstructed_hz.push_back(
            reconstructed_tls_rate(sol.c, opts.kappa0_fixed_hz, sol.kappa_ext_hz, x));
        const double r = x / fit.a_c;
        out.curve_model_hz.push_back(fit.kappa_tls_hz * std::pow(1.0 + r * r, -fit.beta));
    }
    return out;
}

ReconstructionResult reconstruct(const ComplexSpectrum& output, const ComplexSpectrum& drive_in,
                                 double kappa_ext_guess_hz, const ReconstructionOptions& opts) {
    const PartialSpectrum first = intracavity_from_output(output, drive_in, kappa_ext_guess_hz, opts.selection);
    if (!opts.two_pass) return reconstruct_partial(first, opts);

    first.validate(opts.order > 1);
    const HMatrix hm = build_h_matrix(first, opts.order, opts.odd_only, opts.oversample);
    const double first_pass = solve_parameters(hm, opts.cutoff).kappa_ext_hz;
    const double consistent = std::sqrt(kappa_ext_guess_hz * first_pass);

    const PartialSpectrum second = intracavity_from_output(output, drive_in, consistent, opts.selection);
    ReconstructionResult out = reconstruct_partial(second, opts);
    out.kappa_ext_first_pass_hz = first_pass;
    return out;
}

}  // namespace tlsimp::recon
