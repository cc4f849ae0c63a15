#include "tlsimp/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "tlsimp/demodulation.hpp"
#include "tlsimp/errors.hpp"

namespace tlsimp {

namespace odeint = boost::numeric::odeint;

namespace {

using State = std::array<double, 2>;

constexpr int kMaxConsecutiveRejects = 500;

/// Right-hand side of the rotating-frame equation of motion.
class EnvelopeDynamics {
public:
    EnvelopeDynamics(const ResonatorModel& model, const DriveComb& drive, double frame_hz)
        : detuning_(kTwoPi * (model.f0_hz - frame_hz)),
          linear_damping_(kPi * (model.kappa0_hz + model.kappa_ext_hz)),
          tls_damping_(kPi * model.kappa_tls_hz),
          inv_ac2_(1.0 / (model.a_c * model.a_c)),
          beta_(model.beta),
          coupling_(std::sqrt(kTwoPi * model.kappa_ext_hz)),
          w1_(kTwoPi * (drive.f1_hz() - frame_hz)),
          w2_(kTwoPi * (drive.f2_hz() - frame_hz)),
          drive1_(std::polar(drive.amplitude, drive.phase1)),
          drive2_(std::polar(drive.amplitude, drive.phase2)) {}

    void operator()(const State& y, State& dydt, double t) const {
        const Complex a{y[0], y[1]};
        const double r2 = y[0] * y[0] + y[1] * y[1];
        double damping = linear_damping_;
        if (tls_damping_ != 0.0) damping += tls_damping_ * std::pow(1.0 + r2 * inv_ac2_, -beta_);
        const Complex a_in = drive1_ * std::polar(1.0, w1_ * t) + drive2_ * std::polar(1.0, w2_ * t);
        const Complex da = Complex{0.0, detuning_} * a - damping * a - coupling_ * a_in;
        dydt[0] = da.real();
        dydt[1] = da.imag();
    }

private:
    double detuning_;
    double linear_damping_;
    double tls_damping_;
    double inv_ac2_;
    double beta_;
    double coupling_;
    double w1_;
    double w2_;
    Complex drive1_;
    Complex drive2_;
};

using Stepper = odeint::runge_kutta_dopri5<State>;
using Controlled = odeint::controlled_runge_kutta<Stepper>;

/// Error-controlled stepping that lands exactly on requested times.
class Integrator {
public:
    Integrator(const EnvelopeDynamics& rhs, const SimulationConfig& cfg, double initial_dt)
        : rhs_(rhs),
          stepper_(cfg.max_step_s > 0.0 ? odeint::make_controlled(cfg.abs_tol, cfg.rel_tol, cfg.max_step_s, Stepper())
                                        : odeint::make_controlled(cfg.abs_tol, cfg.rel_tol, Stepper())),
          dt_(initial_dt) {}

    void advance_to(State& y, double t_end) {
        while (t_ < t_end) {
            const double remaining = t_end - t_;
            if (remaining <= 1e-15 * std::max(1.0, std::abs(t_end))) {
                t_ = t_end;
                break;
            }
            bool truncated = dt_ >= remaining;
            double dt = truncated ? remaining : dt_;
            const double dt_before = dt_;
            int rejects = 0;
            while (stepper_.try_step(rhs_, y, t_, dt) == odeint::fail) {
                truncated = false;
                ++stats_.rejected_steps;
                if (++rejects > kMaxConsecutiveRejects || !(dt > 0.0) || t_ + dt == t_) {
                    std::ostringstream os;
                    os << "integrator failed to meet tolerance at t = " << t_ << " s (step " << dt
                       << " s, accepted " << stats_.accepted_steps << ", rejected " << stats_.rejected_steps << ")";
                    throw NumericalError(os.str());
                }
            }
            ++stats_.accepted_steps;
            // A step shortened to hit t_end should not shrink the next one.
            dt_ = truncated ? std::max(dt, dt_before) : dt;
            if (truncated) t_ = t_end;
            if (!std::isfinite(y[0]) || !std::isfinite(y[1])) {
                std::ostringstream os;
                os << "integrator produced a non-finite state at t = " << t_ << " s";
                throw NumericalError(os.str());
            }
        }
        stats_.simulated_s = t_;
    }

    [[nodiscard]] double time() const noexcept { return t_; }
    [[nodiscard]] const IntegratorStats& stats() const noexcept { return stats_; }
    IntegratorStats& stats() noexcept { return stats_; }

private:
    EnvelopeDynamics rhs_;
    Controlled stepper_;
    double t_ = 0.0;
    double dt_;
    IntegratorStats stats_;
};

void require_drive_on_comb(const DriveComb& drive, const DetectionComb& comb) {
    const double tol = 1e-9 * std::max(1.0, comb.spacing_hz);
    if (std::abs(comb.spacing_hz - 0.5 * drive.delta_hz) > tol)
        throw ValidationError("simulate_two_tone: detection spacing must equal delta/2");
    if (std::abs(comb.f_center_hz - drive.f_center_hz) > 1e-6)
        throw ValidationError("simulate_two_tone: detection comb must be centred on the drive pair");
}

double relative_change(const ComplexSpectrum& prev, const ComplexSpectrum& next, std::size_t i1, std::size_t i2) {
    double worst = 0.0;
    for (std::size_t i : {i1, i2}) {
        const double scale = std::abs(prev.amplitude(i));
        const double diff = std::abs(next.amplitude(i) - prev.amplitude(i));
        worst = std::max(worst, scale > 0.0 ? diff / scale : diff);
    }
    return worst;
}

}  // namespace

void SimulationConfig::validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ValidationError("simulation: tolerances must be positive");
    if (transient_periods < 1) throw ValidationError("simulation: transient_periods must be >= 1");
    if (measure_periods < 1) throw ValidationError("simulation: measure_periods must be >= 1");
    if (samples_per_period < 8) throw ValidationError("simulation: samples_per_period must be >= 8");
    if (max_settle_windows < 1) throw ValidationError("simulation: max_settle_windows must be >= 1");
    if (!(steady_state_tol > 0.0)) throw ValidationError("simulation: steady_state_tol must be positive");
    if (!(max_step_s >= 0.0)) throw ValidationError("simulation: max_step_s must be non-negative");
    if (!(noise_amplitude >= 0.0)) throw ValidationError("simulation: noise_amplitude must be non-negative");
    if (frame_hz && !std::isfinite(*frame_hz)) throw ValidationError("simulation: frame must be finite");
}

ComplexSpectrum drive_spectrum(const DriveComb& drive, const DetectionComb& comb, double frame_hz) {
    auto spec = ComplexSpectrum::zeros(Frame::rotating(frame_hz), comb.frequencies());
    spec.set_amplitude(comb.position(-1), std::polar(drive.amplitude, drive.phase1));
    spec.set_amplitude(comb.position(1), std::polar(drive.amplitude, drive.phase2));
    return spec;
}

ComplexSpectrum output_field(const ComplexSpectrum& intracavity, const ComplexSpectrum& drive_in,
                             double kappa_ext_hz) {
    if (!(kappa_ext_hz >= 0.0)) throw ValidationError("output_field: kappa_ext must be non-negative");
    return intracavity.axpy(std::sqrt(kTwoPi * kappa_ext_hz), drive_in);
}

TwoToneResponse simulate_two_tone(const ResonatorModel& model, const DriveComb& drive, const DetectionComb& comb,
                                  const SimulationConfig& cfg) {
    model.validate();
    drive.validate();
    comb.validate();
    cfg.validate();
    require_drive_on_comb(drive, comb);

    const double frame = cfg.frame_hz.value_or(drive.f_center_hz);
    const Frame tag = Frame::rotating(frame);
    const auto drive_in = drive_spectrum(drive, comb, frame);

    TwoToneResponse out;
    out.drive = drive_in;
    if (drive.amplitude == 0.0) {
        out.intracavity = ComplexSpectrum::zeros(tag, comb.frequencies());
        out.output = output_field(out.intracavity, drive_in, model.kappa_ext_hz);
        return out;
    }

    const double period = comb.period_s();
    const int samples = cfg.samples_per_period * cfg.measure_periods;
    const double window = period * cfg.measure_periods;
    const double dt_sample = window / samples;

    EnvelopeDynamics rhs(model, drive, frame);
    Integrator integrator(rhs, cfg, 1e-3 / (kPi * std::max(model.kappa_total_hz(), 1.0)));
    State y{0.0, 0.0};

    double window_start = period * cfg.transient_periods;
    integrator.advance_to(y, window_start);

    auto measure = [&]() {
        TimeSeries series{window_start, dt_sample, {}};
        series.samples.reserve(static_cast<std::size_t>(samples));
        for (int j = 0; j < samples; ++j) {
            integrator.advance_to(y, window_start + j * dt_sample);
            series.samples.emplace_back(y[0], y[1]);
        }
        integrator.advance_to(y, window_start + window);
        window_start += window;
        ++integrator.stats().windows;
        return demodulate(series, comb, frame);
    };

    const std::size_t i1 = comb.position(-1);
    const std::size_t i2 = comb.position(1);
    ComplexSpectrum previous = measure();
    ComplexSpectrum current = measure();
    double change = relative_change(previous, current, i1, i2);
    while (change >= cfg.steady_state_tol) {
        if (integrator.stats().windows >= cfg.max_settle_windows + 1) {
            std::ostringstream os;
            os << "simulate_two_tone: response did not settle after " << integrator.stats().windows
               << " windows (relative change " << change << " at the drive tones, tolerance "
               << cfg.steady_state_tol << ")";
            throw NumericalError(os.str());
        }
        previous = std::move(current);
        current = measure();
        change = relative_change(previous, current, i1, i2);
    }

    out.stats = integrator.stats();
    out.stats.steady_state_change = change;
    out.intracavity = std::move(current);
    out.output = output_field(out.intracavity, drive_in, model.kappa_ext_hz);

    if (cfg.noise_amplitude > 0.0) {
        std::mt19937_64 rng(cfg.rng_seed);
        std::normal_distribution<double> normal(0.0, cfg.noise_amplitude / std::sqrt(2.0));
        for (std::size_t i = 0; i < out.output.size(); ++i) {
            const double re = normal(rng);
            const double im = normal(rng);
            out.output.set_amplitude(i, out.output.amplitude(i) + Complex{re, im});
        }
    }
    return out;
}

}  // namespace tlsimp
