#include "tlsimp/analysis/circle_fit.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <sstream>

#include <boost/math/tools/minima.hpp>
#include <Eigen/Dense>

#include "least_squares.hpp"
#include "tlsimp/errors.hpp"

namespace tlsimp::analysis {

namespace {

double wrap_angle(double x) { return std::remainder(x, kTwoPi); }

std::vector<double> unwrapped_phase(std::span<const Complex> z) {
    std::vector<double> ph(z.size());
    double offset = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double raw = std::arg(z[i]);
        if (i > 0) {
            const double prev = ph[i - 1] - offset;
            const double jump = raw - prev;
            if (jump > kPi) offset -= kTwoPi;
            if (jump < -kPi) offset += kTwoPi;
        }
        ph[i] = raw + offset;
    }
    return ph;
}

struct Circle {
    Complex center;
    double radius = 0.0;
    double scatter = 0.0;
};

/// Algebraic (Kasa) fit on centred, rescaled points.
Circle fit_circle(std::span<const Complex> z) {
    Complex mean{0.0, 0.0};
    for (auto v : z) mean += v;
    mean /= static_cast<double>(z.size());
    double scale = 0.0;
    for (auto v : z) scale += std::norm(v - mean);
    scale = std::sqrt(scale / static_cast<double>(z.size()));
    if (!(scale > 0.0)) throw NumericalError("circle fit: all points coincide");

    const auto n = static_cast<Eigen::Index>(z.size());
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Complex u = (z[static_cast<std::size_t>(i)] - mean) / scale;
        a(i, 0) = u.real();
        a(i, 1) = u.imag();
        a(i, 2) = 1.0;
        b[i] = -std::norm(u);
    }
    const Eigen::Vector3d sol = a.colPivHouseholderQr().solve(b);
    const Complex cu{-0.5 * sol[0], -0.5 * sol[1]};
    const double r2 = std::norm(cu) - sol[2];
    if (!(r2 > 0.0)) throw NumericalError("circle fit: degenerate circle");

    Circle c;
    c.center = mean + scale * cu;
    c.radius = scale * std::sqrt(r2);
    double ss = 0.0;
    for (auto v : z) {
        const double d = std::abs(v - c.center) - c.radius;
        ss += d * d;
    }
    c.scatter = std::sqrt(ss / static_cast<double>(z.size()));
    return c;
}

std::vector<Complex> remove_delay(const S21Trace& t, double tau, double f_ref) {
    std::vector<Complex> out(t.s21.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = t.s21[i] * std::polar(1.0, kTwoPi * (t.frequencies_hz[i] - f_ref) * tau);
    return out;
}

/// Common slope of the unwrapped phase on the two off-resonant windows.
double initial_delay(const S21Trace& t, double window) {
    const std::size_t n = t.s21.size();
    const auto w = std::max<std::size_t>(3, static_cast<std::size_t>(window * static_cast<double>(n)));
    double sxy = 0.0;
    double sxx = 0.0;
    for (int side = 0; side < 2; ++side) {
        const std::size_t lo = side == 0 ? 0 : n - w;
        std::span<const Complex> seg(t.s21.data() + lo, w);
        const auto ph = unwrapped_phase(seg);
        double mf = 0.0;
        double mp = 0.0;
        for (std::size_t i = 0; i < w; ++i) {
            mf += t.frequencies_hz[lo + i];
            mp += ph[i];
        }
        mf /= static_cast<double>(w);
        mp /= static_cast<double>(w);
        for (std::size_t i = 0; i < w; ++i) {
            const double df = t.frequencies_hz[lo + i] - mf;
            sxx += df * df;
            sxy += df * (ph[i] - mp);
        }
    }
    return -(sxy / sxx) / kTwoPi;
}

}  // namespace

void S21Trace::validate() const {
    if (frequencies_hz.size() != s21.size()) throw ValidationError("S21 trace: frequency and S21 counts differ");
    if (frequencies_hz.size() < 20) throw ValidationError("S21 trace: need at least 20 points");
    for (std::size_t i = 0; i < frequencies_hz.size(); ++i) {
        if (!std::isfinite(frequencies_hz[i]) || !std::isfinite(s21[i].real()) || !std::isfinite(s21[i].imag()))
            throw ValidationError("S21 trace: non-finite value");
        if (i > 0 && !(frequencies_hz[i] > frequencies_hz[i - 1]))
            throw ValidationError("S21 trace: frequencies must be strictly increasing");
    }
}

Complex NotchParameters::s21(double f_hz) const {
    const Complex env = a * std::polar(1.0, alpha - kTwoPi * f_hz * tau_s);
    const Complex res = (q_l / q_c_mag) * std::polar(1.0, phi) / Complex{1.0, 2.0 * q_l * (f_hz - f_r_hz) / f_r_hz};
    return env * (1.0 - res);
}

double qi_from_ql(double q_l, double q_c_mag, double phi) {
    if (!(q_l > 0.0) || !(q_c_mag > 0.0)) throw ValidationError("qi_from_ql: quality factors must be positive");
    const double inv = 1.0 / q_l - std::cos(phi) / q_c_mag;
    if (!(inv > 0.0)) {
        std::ostringstream os;
        os << "qi_from_ql: inconsistent inputs give non-positive 1/Q_i = " << inv;
        throw ValidationError(os.str());
    }
    return 1.0 / inv;
}

double ql_from_qi(double q_i, double q_c_mag, double phi) {
    if (!(q_i > 0.0) || !(q_c_mag > 0.0)) throw ValidationError("ql_from_qi: quality factors must be positive");
    const double inv = 1.0 / q_i + std::cos(phi) / q_c_mag;
    if (!(inv > 0.0)) throw ValidationError("ql_from_qi: inconsistent inputs give non-positive 1/Q_l");
    return 1.0 / inv;
}

S21Trace generate_s21(const NotchParameters& params, double f_start_hz, double f_stop_hz, int points,
                      double noise_std, std::uint64_t seed) {
    if (points < 2 || !(f_stop_hz > f_start_hz)) throw ValidationError("generate_s21: invalid frequency grid");
    if (!(noise_std >= 0.0)) throw ValidationError("generate_s21: noise must be non-negative");
    S21Trace t;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, noise_std / std::sqrt(2.0));
    for (int i = 0; i < points; ++i) {
        const double f = f_start_hz + (f_stop_hz - f_start_hz) * i / (points - 1);
        Complex v = params.s21(f);
        if (noise_std > 0.0) {
            const double re = normal(rng);
            const double im = normal(rng);
            v += Complex{re, im};
        }
        t.frequencies_hz.push_back(f);
        t.s21.push_back(v);
    }
    return t;
}

CircleFitResult circle_fit(const S21Trace& trace, const CircleFitOptions& opts) {
    trace.validate();
    if (!(opts.delay_window > 0.0 && opts.delay_window < 0.5))
        throw ValidationError("circle_fit: delay_window must lie in (0, 0.5)");

    const std::size_t n = trace.s21.size();
    const double f_ref = 0.5 * (trace.frequencies_hz.front() + trace.frequencies_hz.back());
    const double span = trace.frequencies_hz.back() - trace.frequencies_hz.front();

    // (1) cable delay, refined so the corrected points lie on a circle.
    const double tau0 = initial_delay(trace, opts.delay_window);
    const double bracket = 2.0 / (kTwoPi * span);
    auto circle_misfit = [&](double tau) {
        const auto z = remove_delay(trace, tau, f_ref);
        const Circle c = fit_circle(z);
        return c.scatter / c.radius;
    };
    // The misfit is multimodal in tau; locate the basin on a grid first.
    constexpr int kScan = 400;
    const double step = 2.0 * bracket / kScan;
    double scan_best = tau0;
    double scan_value = circle_misfit(tau0);
    for (int i = 0; i <= kScan; ++i) {
        const double t = tau0 - bracket + i * step;
        const double v = circle_misfit(t);
        if (v < scan_value) {
            scan_value = v;
            scan_best = t;
        }
    }
    const auto best = boost::math::tools::brent_find_minima(circle_misfit, scan_best - step, scan_best + step, 52);
    double tau = best.first;

    // (2) algebraic circle fit.
    const auto z = remove_delay(trace, tau, f_ref);
    const Circle circle = fit_circle(z);

    // (3) phase of the centred circle versus frequency.
    std::vector<Complex> centred(n);
    for (std::size_t i = 0; i < n; ++i) centred[i] = z[i] - circle.center;
    const auto theta = unwrapped_phase(centred);
    const auto [tmin, tmax] = std::minmax_element(theta.begin(), theta.end());
    if (*tmax - *tmin < 0.5 * kPi) throw NumericalError("circle_fit: no resonance found (phase swing below pi/2)");

    std::size_t steepest = 1;
    double steepest_slope = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double slope = (theta[i + 1] - theta[i - 1]) / (trace.frequencies_hz[i + 1] - trace.frequencies_hz[i - 1]);
        if (std::abs(slope) > std::abs(steepest_slope)) {
            steepest_slope = slope;
            steepest = i;
        }
    }
    const double fr0 = trace.frequencies_hz[steepest];
    const double ql0 = std::max(std::abs(steepest_slope) * fr0 / 4.0, 1.0);
    const double width0 = fr0 / ql0;

    const detail::ResidualFn phase_residual = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
        const double fr = fr0 + q[1] * width0;
        const double ql = std::exp(q[2]);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = (trace.frequencies_hz[i] - fr) / fr;
            r[static_cast<Eigen::Index>(i)] = theta[i] - (q[0] - 2.0 * std::atan(2.0 * ql * x));
        }
    };
    Eigen::VectorXd q0(3);
    q0 << theta[steepest], 0.0, std::log(ql0);
    const auto phase_fit = detail::levenberg_marquardt(phase_residual, q0, static_cast<int>(n));
    if (!phase_fit.converged) throw NumericalError("circle_fit: phase fit did not converge; " + phase_fit.describe());
    const double theta0 = phase_fit.x[0];
    double f_r = fr0 + phase_fit.x[1] * width0;
    double q_l = std::exp(phase_fit.x[2]);

    // (4) diameter correction from the off-resonant point.
    const Complex off_res = circle.center + circle.radius * std::polar(1.0, theta0 + kPi);
    double a = std::abs(off_res);
    double alpha_local = std::arg(off_res);
    const Complex c_norm = circle.center / off_res;
    const double r_norm = circle.radius / a;
    double q_c = q_l / (2.0 * r_norm);
    double phi = std::atan2(-c_norm.imag(), 1.0 - c_norm.real());

    // Joint refinement of all seven parameters on the complex data.
    const double width = f_r / q_l;
    const double tau_unit = 1.0 / (kTwoPi * span);
    const double f_r_start = f_r;
    const double a_start = a;
    const detail::ResidualFn full_residual = [&](const Eigen::VectorXd& v, Eigen::VectorXd& r) {
        const double amp = std::exp(v[0]);
        const double alpha = v[1];
        const double tv = v[2] * tau_unit;
        const double fr = f_r_start + v[3] * width;
        const double ql = std::exp(v[4]);
        const double qc = std::exp(v[5]);
        const double ph = v[6];
        for (std::size_t i = 0; i < n; ++i) {
            const double f = trace.frequencies_hz[i];
            const Complex env = amp * std::polar(1.0, alpha - kTwoPi * (f - f_ref) * tv);
            const Complex res = (ql / qc) * std::polar(1.0, ph) / Complex{1.0, 2.0 * ql * (f - fr) / fr};
            const Complex d = (env * (1.0 - res) - trace.s21[i]) / a_start;
            r[static_cast<Eigen::Index>(2 * i)] = d.real();
            r[static_cast<Eigen::Index>(2 * i + 1)] = d.imag();
        }
    };
    Eigen::VectorXd v0(7);
    v0 << std::log(a), alpha_local, tau / tau_unit, 0.0, std::log(q_l), std::log(q_c), phi;
    const auto full = detail::levenberg_marquardt(full_residual, v0, static_cast<int>(2 * n));
    if (!full.converged) throw NumericalError("circle_fit: joint refinement did not converge; " + full.describe());

    a = std::exp(full.x[0]);
    alpha_local = full.x[1];
    tau = full.x[2] * tau_unit;
    f_r = f_r_start + full.x[3] * width;
    q_l = std::exp(full.x[4]);
    q_c = std::exp(full.x[5]);
    phi = wrap_angle(full.x[6]);

    CircleFitResult out;
    out.params = NotchParameters{a, wrap_angle(alpha_local + kTwoPi * f_ref * tau), tau, f_r, q_l, q_c, phi};
    try {
        out.q_i = qi_from_ql(q_l, q_c, phi);
    } catch (const ValidationError& e) {
        throw NumericalError(std::string("circle_fit: fitted parameters are unphysical: ") + e.what());
    }
    out.rms_residual = full.norm * a_start / std::sqrt(static_cast<double>(n));
    out.circle_radius = circle.radius;
    out.circle_scatter = circle.scatter;
    out.ill_conditioned = circle.radius < 5.0 * circle.scatter;
    return out;
}

}  // namespace tlsimp::analysis
