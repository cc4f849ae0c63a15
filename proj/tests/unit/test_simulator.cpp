#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>

#include "fixtures.hpp"
#include "tlsimp/demodulation.hpp"
#include "tlsimp/errors.hpp"
#include "tlsimp/simulator.hpp"
#include "tlsimp/sweeps.hpp"

using namespace tlsimp;
using tlsimp::testing::harmonic_balance_model;
using tlsimp::testing::rel_err;
using tlsimp::testing::resonant_drive;
using tlsimp::testing::standard_model;

namespace {

double max_abs(std::span<const Complex> xs) {
    double m = 0.0;
    for (auto x : xs) m = std::max(m, std::abs(x));
    return m;
}

TimeSeries synth(const DetectionComb& comb, double frame, const std::vector<std::pair<int, Complex>>& tones,
                 int samples, Complex offset = 0.0) {
    TimeSeries ts{0.37, comb.period_s() / samples, {}};
    for (int j = 0; j < samples; ++j) {
        const double t = ts.t0_s + j * ts.dt_s;
        Complex a = offset;
        for (const auto& [m, amp] : tones) a += amp * std::polar(1.0, kTwoPi * (comb.frequency(m) - frame) * t);
        ts.samples.push_back(a);
    }
    return ts;
}

}  // namespace

TEST_CASE("demodulation: single tone is orthogonal to all other bins") {
    const DetectionComb comb{4.11e9, 50.0, 31};
    const Complex amp{0.3, -1.7};
    for (int m : {-15, -1, 0, 4, 15}) {
        const auto spec = demodulate(synth(comb, comb.f_center_hz, {{m, amp}}, 1024), comb, comb.f_center_hz);
        for (int k = -15; k <= 15; ++k) {
            const Complex got = spec.amplitude(comb.position(k));
            if (k == m) {
                CHECK(std::abs(got - amp) < 1e-12 * std::abs(amp));
            } else {
                CHECK(std::abs(got) < 1e-12 * std::abs(amp));
            }
        }
    }
}

TEST_CASE("demodulation: constant lands in the frame bin only") {
    const DetectionComb comb{4.11e9, 50.0, 11};
    const auto spec = demodulate(synth(comb, comb.f_center_hz, {}, 256, {2.0, 1.0}), comb, comb.f_center_hz);
    for (int k = -5; k <= 5; ++k) {
        const double mag = std::abs(spec.amplitude(comb.position(k)));
        if (k == 0) {
            CHECK(std::abs(spec.amplitude(comb.position(0)) - Complex(2.0, 1.0)) < 1e-14);
        } else {
            CHECK(mag < 1e-13);
        }
    }
}

TEST_CASE("demodulation: multi-tone synthetic signal is recovered exactly") {
    const DetectionComb comb{1e6, 25.0, 21};
    const double frame = comb.frequency(1);
    std::vector<std::pair<int, Complex>> tones{{-1, {1.0, 0.5}}, {1, {-0.2, 0.9}}, {3, {1e-3, 2e-3}}, {-7, {0.0, -4e-5}}};
    const auto spec = demodulate(synth(comb, frame, tones, 512), comb, frame);
    CHECK(spec.frame() == Frame::rotating(frame));
    for (const auto& [m, amp] : tones) CHECK(std::abs(spec.amplitude(comb.position(m)) - amp) < 1e-13);
}

TEST_CASE("demodulation: window must be a whole number of comb periods") {
    const DetectionComb comb{4.11e9, 50.0, 11};
    auto ts = synth(comb, comb.f_center_hz, {{1, 1.0}}, 1000);
    ts.dt_s *= 1.1;
    CHECK_THROWS_AS((void)demodulate(ts, comb, comb.f_center_hz), ValidationError);
}

TEST_CASE("simulate: zero drive gives an all-zero spectrum") {
    const auto m = harmonic_balance_model();
    auto d = resonant_drive(m, 0.0);
    const auto r = simulate_two_tone(m, d, DetectionComb::for_drive(d, 31), {});
    CHECK(max_abs(r.output.amplitudes()) == 0.0);
    CHECK(max_abs(r.intracavity.amplitudes()) == 0.0);
}

TEST_CASE("simulate: configuration and comb checks") {
    const auto m = harmonic_balance_model();
    const auto d = resonant_drive(m, 10.0);
    auto comb = DetectionComb::for_drive(d, 31);
    comb.spacing_hz = 100.0;
    CHECK_THROWS_AS((void)simulate_two_tone(m, d, comb, {}), ValidationError);
    SimulationConfig cfg;
    cfg.transient_periods = 0;
    CHECK_THROWS_AS((void)simulate_two_tone(m, d, DetectionComb::for_drive(d, 31), cfg), ValidationError);
}

TEST_CASE("simulate: linear resonator mixes nothing and matches the analytic response") {
    auto m = standard_model();
    m.kappa_tls_hz = 0.0;
    const auto d = resonant_drive(m, 1e3);
    const auto comb = DetectionComb::for_drive(d, 31);
    const auto r = simulate_two_tone(m, d, comb, {});
    const double p_drive = std::norm(r.output.amplitude(comb.position(1)));
    for (int k = -15; k <= 15; ++k) {
        if (k == 1 || k == -1) continue;
        CHECK(std::norm(r.output.amplitude(comb.position(k))) < 1e-10 * p_drive);
    }
    for (int k : {-1, 1}) {
        const Complex want = steady_state_amplitude_linear(m, comb.frequency(k), d.amplitude);
        CHECK(std::abs(r.intracavity.amplitude(comb.position(k)) - want) < 1e-6 * std::abs(want));
    }
}

TEST_CASE("output field: input-output relation") {
    const auto m = standard_model();
    const DetectionComb comb{m.f0_hz, 50.0, 5};
    DriveComb d{m.f0_hz, 100.0, 3.0, 0.0, 0.0};
    const auto drive_in = drive_spectrum(d, comb, m.f0_hz);
    const auto zero = ComplexSpectrum::zeros(drive_in.frame(), comb.frequencies());
    const auto passthrough = output_field(zero, drive_in, m.kappa_ext_hz);
    for (std::size_t i = 0; i < comb.frequencies().size(); ++i) CHECK(passthrough.amplitude(i) == drive_in.amplitude(i));

    // On resonance |a_out/a_in| = |1 - 2 kappa_ext / kappa_total|.
    auto on = zero;
    on.set_amplitude(comb.position(1), steady_state_amplitude_linear(m, m.f0_hz, drive_in.amplitude(comb.position(1))));
    const auto out = output_field(on, drive_in, m.kappa_ext_hz);
    const Complex s = out.amplitude(comb.position(1)) / drive_in.amplitude(comb.position(1));
    CHECK(rel_err(std::abs(s), std::abs(1.0 - 2.0 * m.kappa_ext_hz / m.kappa_total_hz())) < 1e-14);

    // +50 Hz tone of the standard model; golden from the oracle.
    const auto shifted = zero;
    auto at50 = shifted;
    at50.set_amplitude(comb.position(1), steady_state_amplitude_linear(m, comb.frequency(1), 3.0));
    const Complex s50 = output_field(at50, drive_in, m.kappa_ext_hz).amplitude(comb.position(1)) / 3.0;
    CHECK(std::abs(s50 - Complex(-0.16917015146182434246, 0.010096460720741142854)) < 1e-14);

    const ComplexSpectrum other(Frame::rotating(m.f0_hz + 1.0), comb.frequencies(),
                                std::vector<Complex>(comb.frequencies().size()));
    CHECK_THROWS_AS((void)output_field(other, drive_in, m.kappa_ext_hz), ValidationError);
}

TEST_CASE("simulate: odd IMPs at every other tone, ordered by strength, even bins empty") {
    const auto m = harmonic_balance_model();
    const auto d = resonant_drive(m, 1e3);
    const auto comb = DetectionComb::for_drive(d, 31);
    const auto r = simulate_two_tone(m, d, comb, {});
    auto p = [&](int k) { return std::norm(r.output.amplitude(comb.position(k))); };

    double strongest_imp = 0.0;
    for (int k = 3; k <= 15; k += 2) strongest_imp = std::max({strongest_imp, p(k), p(-k)});
    CHECK(strongest_imp == doctest::Approx(std::max(p(3), p(-3))));
    for (int k = 3; k <= 11; k += 2) {
        CHECK(p(k) > 1e-6 * p(1));
        CHECK(p(k + 2) < p(k));
        CHECK(p(-k - 2) < p(-k));
    }
    for (int k = -14; k <= 14; k += 2) CHECK(p(k) < 1e-8 * strongest_imp);
    CHECK(r.stats.steady_state_change < 1e-4);
    CHECK(r.stats.accepted_steps > 0);
}

TEST_CASE("simulate: frame independence") {
    const auto m = harmonic_balance_model();
    const auto d = resonant_drive(m, 300.0);
    const auto comb = DetectionComb::for_drive(d, 21);
    SimulationConfig a_cfg, b_cfg;
    b_cfg.frame_hz = d.f_center_hz + comb.spacing_hz;
    const auto a = simulate_two_tone(m, d, comb, a_cfg);
    const auto b = simulate_two_tone(m, d, comb, b_cfg);
    const double scale = max_abs(a.output.amplitudes());
    for (std::size_t i = 0; i < comb.frequencies().size(); ++i)
        CHECK(std::abs(a.output.amplitude(i) - b.output.amplitude(i)) < 1e-6 * scale);
}

TEST_CASE("simulate: energy balance of the linear resonator") {
    auto m = standard_model();
    m.kappa_tls_hz = 0.0;
    auto d = resonant_drive(m, 50.0);
    d.f_center_hz += 1500.0;
    const auto comb = DetectionComb::for_drive(d, 11);
    const auto r = simulate_two_tone(m, d, comb, {});
    double p_out = 0.0, p_in = 0.0, stored = 0.0;
    for (std::size_t i = 0; i < comb.frequencies().size(); ++i) {
        p_out += std::norm(r.output.amplitude(i));
        p_in += std::norm(r.drive.amplitude(i));
        stored += std::norm(r.intracavity.amplitude(i));
    }
    CHECK(p_out <= p_in);
    CHECK(rel_err(p_in - p_out, kTwoPi * m.kappa0_hz * stored) < 1e-2);
}

TEST_CASE("simulate: IMP powers do not depend on the drive phases") {
    const auto m = harmonic_balance_model();
    auto d = resonant_drive(m, 500.0);
    const auto comb = DetectionComb::for_drive(d, 15);
    const auto ref = simulate_two_tone(m, d, comb, {});
    d.phase1 = 0.7;
    d.phase2 = -2.1;
    const auto rot = simulate_two_tone(m, d, comb, {});
    for (int k = -7; k <= 7; k += 2) {
        const double a = std::norm(ref.output.amplitude(comb.position(k)));
        const double b = std::norm(rot.output.amplitude(comb.position(k)));
        CHECK(rel_err(b, a) < 1e-5);
    }
}

TEST_CASE("simulate: doubling the measurement window stays within the steady-state tolerance") {
    const auto m = harmonic_balance_model();
    const auto d = resonant_drive(m, 1e3);
    const auto comb = DetectionComb::for_drive(d, 21);
    SimulationConfig one, two;
    two.measure_periods = 2;
    const auto a = simulate_two_tone(m, d, comb, one);
    const auto b = simulate_two_tone(m, d, comb, two);
    for (std::size_t i = 0; i < comb.frequencies().size(); ++i) {
        const double ref = std::abs(a.output.amplitude(i));
        if (ref < 1e-9 * max_abs(a.output.amplitudes())) continue;
        CHECK(std::abs(a.output.amplitude(i) - b.output.amplitude(i)) < 1e-4 * ref);
    }
}

TEST_CASE("simulate: unsettled response is reported") {
    const auto m = harmonic_balance_model();
    const auto d = resonant_drive(m, 100.0);
    SimulationConfig cfg;
    cfg.transient_periods = 1;
    cfg.max_settle_windows = 1;
    cfg.steady_state_tol = 1e-300;
    CHECK_THROWS_AS((void)simulate_two_tone(m, d, DetectionComb::for_drive(d, 11), cfg), NumericalError);
}

TEST_CASE("simulate: output noise is seeded") {
    const auto m = harmonic_balance_model();
    const auto d = resonant_drive(m, 100.0);
    const auto comb = DetectionComb::for_drive(d, 11);
    SimulationConfig cfg;
    cfg.noise_amplitude = 1.0;
    cfg.rng_seed = 7;
    const auto a = simulate_two_tone(m, d, comb, cfg);
    const auto b = simulate_two_tone(m, d, comb, cfg);
    cfg.rng_seed = 8;
    const auto c = simulate_two_tone(m, d, comb, cfg);
    bool differs = false;
    for (std::size_t i = 0; i < comb.frequencies().size(); ++i) {
        CHECK(a.output.amplitude(i) == b.output.amplitude(i));
        differs = differs || a.output.amplitude(i) != c.output.amplitude(i);
        CHECK(a.intracavity.amplitude(i) == c.intracavity.amplitude(i));
    }
    CHECK(differs);
}

TEST_CASE("sweep power: linear resonator stays at the numerical floor") {
    auto m = standard_model();
    m.kappa_tls_hz = 0.0;
    const auto d = resonant_drive(m, 1.0);
    const auto res = sweep_power(m, d, DetectionComb::for_drive(d, 21), {}, {1e3});
    REQUIRE(res.imp_powers.size() == 1);
    for (double p : res.imp_powers[0]) CHECK(p < 1e-10 * res.drive_powers[0]);
}

TEST_CASE("sweep power: results follow axis order and are thread-count independent") {
    const auto m = harmonic_balance_model();
    const auto d = resonant_drive(m, 1.0);
    const auto comb = DetectionComb::for_drive(d, 21);
    const std::vector<double> targets{100.0, 1e3, 1e4};
    const auto serial = sweep_power(m, d, comb, {}, targets, {1});
    const auto parallel = sweep_power(m, d, comb, {}, targets, {3});
    REQUIRE(serial.axis == targets);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        CHECK(serial.imp_powers[i] == parallel.imp_powers[i]);
        if (i > 0) CHECK(serial.imp_powers[i][0] > serial.imp_powers[i - 1][0]);
    }
}

TEST_CASE("sweep power: failing point is identified") {
    const auto m = harmonic_balance_model();
    const auto d = resonant_drive(m, 1.0);
    SimulationConfig cfg;
    cfg.max_settle_windows = 1;
    cfg.steady_state_tol = 1e-300;
    try {
        (void)sweep_power(m, d, DetectionComb::for_drive(d, 11), cfg, {10.0, 20.0}, {1});
        FAIL("expected an error");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("point 0") != std::string::npos);
    }
    CHECK_THROWS_AS((void)sweep_power(m, d, DetectionComb::for_drive(d, 11), {}, {20.0, 10.0}), ValidationError);
}

TEST_CASE("sweep frequency: mirrored detunings give mirrored spectra") {
    const auto m = harmonic_balance_model();
    const auto d = resonant_drive(m, 1e3);
    const auto comb = DetectionComb::for_drive(d, 21);
    const std::vector<double> centers{m.f0_hz - 4000.0, m.f0_hz, m.f0_hz + 4000.0};
    const auto res = sweep_frequency(m, d, comb, {}, centers);
    // Conjugating the envelope maps detuning +x at comb index k onto -x at -k.
    const auto& lo = res.responses[0].output;
    const auto& hi = res.responses[2].output;
    for (int k = -9; k <= 9; k += 2) {
        const double a = std::norm(lo.amplitude(comb.position(k)));
        const double b = std::norm(hi.amplitude(comb.position(-k)));
        CHECK(rel_err(a, b) < 1e-2);
    }
    for (std::size_t j = 0; j < res.orders.size(); ++j) {
        CHECK(res.imp_powers[1][j] > res.imp_powers[0][j]);
        CHECK(res.imp_powers[1][j] > res.imp_powers[2][j]);
    }
    CHECK(res.drive_transmission[1] < res.drive_transmission[0]);
    CHECK(res.drive_transmission[1] < res.drive_transmission[2]);
}

TEST_CASE("log space grid") {
    const auto g = log_space(200.0, 2e5, 4);
    REQUIRE(g.size() == 4);
    CHECK(g.front() == 200.0);
    CHECK(g.back() == 2e5);
    CHECK(rel_err(g[1], 2000.0) < 1e-12);
    CHECK_THROWS_AS((void)log_space(0.0, 1.0, 3), ValidationError);
}
