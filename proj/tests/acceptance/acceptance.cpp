// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tlsimp/analysis/circle_fit.hpp"
#include "tlsimp/analysis/power_law.hpp"
#include "tlsimp/analysis/tunneling.hpp"
#include "tlsimp/demodulation.hpp"
#include "tlsimp/experiment.hpp"
#include "tlsimp/formats.hpp"
#include "tlsimp/reconstruction.hpp"
#include "tlsimp/simulator.hpp"
#include "tlsimp/sweeps.hpp"

using namespace tlsimp;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kSlopeTol = 0.03;
constexpr double kBetaHalfSlopeMax = 0.05;
constexpr double kOffResonanceImpRatio = 1e-6;
constexpr double kOffResonanceDetuningHz = 700e3;
constexpr double kKappaExtTol = 0.02;
constexpr double kF0TolHz = 1.0;
constexpr double kKappaTlsTol = 0.15;
constexpr double kAcTol = 0.20;
constexpr double kCurveTol = 0.05;
constexpr double kCircleParamTol = 1e-4;
constexpr double kNoisyQiTol = 0.05;
constexpr double kNoiseRelAmplitude = 1e-4;  // -80 dB
constexpr double kTunnelingTol = 0.10;
constexpr double kTunnelingMcRateMin = 0.80;
constexpr double kLinearImpRatio = 1e-10;
constexpr double kEvenBinRatio = 1e-8;
constexpr double kOrthogonalityTol = 1e-12;

const std::vector<double> kReferenceSlopes{0.42, 0.43, 0.44, 0.45};

ResonatorModel standard_model() { return {4.11e9, 860.0, 6770.0, 3950.0, 1.414, 0.3}; }
ResonatorModel harmonic_balance_model() { return {4.11e9, 860.0, 6620.0, 5220.0, 1.641, 0.3}; }

DriveComb resonant_drive(const ResonatorModel& m, double photons) {
    return DriveComb{m.f0_hz, 100.0, drive_for_photon_number(m, photons), 0.0, 0.0};
}

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }
double angle_err(double a, double b) { return std::abs(std::remainder(a - b, kTwoPi)); }

std::string num(double v, int precision = 4) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("criterion %d: %s  %s | %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                dt);
    std::fflush(stdout);
}

Outcome slopes() {
    const auto m = standard_model();
    const auto d = resonant_drive(m, 1.0);
    const auto xs = log_space(200.0, 2e5, 15);
    const auto r = sweep_power(m, d, DetectionComb::for_drive(d, 31), SimulationConfig{}, xs);
    bool ok = true;
    std::string detail;
    for (std::size_t j = 0; j < r.orders.size(); ++j) {
        std::vector<analysis::PowerLawPoint> pts;
        for (std::size_t i = 0; i < xs.size(); ++i) pts.push_back({xs[i], r.imp_powers[i][j]});
        const auto f = analysis::fit_power_law(pts, xs.front(), xs.back());
        ok = ok && std::abs(f.k - kReferenceSlopes[j]) <= kSlopeTol;
        detail += "k" + std::to_string(r.orders[j]) + "=" + num(f.k, 3) + " (ref " + num(kReferenceSlopes[j]) + ") ";
    }
    return {ok, detail + "tol +/-" + num(kSlopeTol)};
}

Outcome beta_scan() {
    auto m = standard_model();
    const auto d = resonant_drive(m, 1.0);
    const auto xs = log_space(200.0, 2e5, 15);
    const std::vector<double> betas{0.1, 0.2, 0.3, 0.4, 0.5};
    const auto rows =
        beta_slope_scan(m, betas, d, DetectionComb::for_drive(d, 31), SimulationConfig{}, xs, xs.front(), xs.back());
    bool decreasing = true;
    std::string detail;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i && !(rows[i].k < rows[i - 1].k)) decreasing = false;
        detail += "k(" + num(rows[i].beta) + ")=" + num(rows[i].k, 3) + " ";
    }
    const bool endpoint = std::abs(rows.back().k) < kBetaHalfSlopeMax;
    return {endpoint && decreasing, detail + "| |k(0.5)|<" + num(kBetaHalfSlopeMax) +
                                        (endpoint ? " yes" : " no") + ", strictly decreasing " +
                                        (decreasing ? "yes" : "no")};
}

Outcome spectroscopy() {
    const auto m = standard_model();
    const auto d = resonant_drive(m, 1e3);
    std::vector<double> centers{m.f0_hz - kOffResonanceDetuningHz};
    for (int i = -15; i <= 15; ++i) centers.push_back(m.f0_hz + 2000.0 * i);
    centers.push_back(m.f0_hz + kOffResonanceDetuningHz);
    const auto r = sweep_frequency(m, d, DetectionComb::for_drive(d, 31), SimulationConfig{}, centers);
    std::size_t dip = 0;
    std::size_t peak = 0;
    for (std::size_t i = 0; i < centers.size(); ++i) {
        if (r.drive_transmission[i] < r.drive_transmission[dip]) dip = i;
        if (r.imp_powers[i][0] > r.imp_powers[peak][0]) peak = i;
    }
    const std::size_t on = 16;
    const double ratio = std::max(r.imp_powers.front()[0], r.imp_powers.back()[0]) / r.imp_powers[on][0];
    const bool ok = dip == on && peak == on && ratio < kOffResonanceImpRatio;
    return {ok, "transmission dip at f_c-f0=" + num(centers[dip] - m.f0_hz) + " Hz, IMP3 peak at " +
                    num(centers[peak] - m.f0_hz) + " Hz, IMP3(700 kHz)/IMP3(f0)=" + num(ratio, 3) + " (< " +
                    num(kOffResonanceImpRatio) + ")"};
}

Outcome roundtrip() {
    bool ok = true;
    std::string detail;
    for (const auto& [name, m] : {std::pair{"hb", harmonic_balance_model()}, std::pair{"std", standard_model()}}) {
        const auto d = resonant_drive(m, m.a_c * m.a_c);
        const auto comb = DetectionComb::for_drive(d, 31);
        const auto sim = simulate_two_tone(m, d, comb, SimulationConfig{});
        recon::ReconstructionOptions o;
        o.kappa0_fixed_hz = m.kappa0_hz;
        o.beta_fixed = m.beta;
        o.selection.max_tones = 16;
        const auto r = recon::reconstruct(sim.output, sim.drive, 5000.0, o);
        double curve = 0.0;
        for (std::size_t i = 0; i < r.curve_amplitude.size(); ++i) {
            const double t = tls_damping_rate(m, r.curve_amplitude[i]);
            curve = std::max(curve, std::abs(r.curve_reconstructed_hz[i] - t) / t);
        }
        const double e_ext = rel_err(r.kappa_ext_hz, m.kappa_ext_hz);
        const double e_f0 = std::abs(r.f0_hz - m.f0_hz);
        const double e_tls = rel_err(r.kappa_tls_hz, m.kappa_tls_hz);
        const double e_ac = rel_err(r.a_c, m.a_c);
        ok = ok && r.tones_used == 16 && e_ext < kKappaExtTol && e_f0 < kF0TolHz && e_tls < kKappaTlsTol &&
             e_ac < kAcTol && curve < kCurveTol;
        detail += std::string(name) + ": kext " + num(100 * e_ext, 2) + "%, f0 " + num(e_f0, 2) + " Hz, ktls " +
                  num(100 * e_tls, 3) + "%, a_c " + num(100 * e_ac, 3) + "%, curve " + num(100 * curve, 3) + "%; ";
    }
    return {ok, detail + "tol 2%/1 Hz/15%/20%/5%"};
}

Outcome circle_fits() {
    using namespace analysis;
    auto trace_for = [](const NotchParameters& p, double noise, std::uint64_t seed) {
        const double lw = p.f_r_hz / p.q_l;
        return generate_s21(p, p.f_r_hz - 5 * lw, p.f_r_hz + 5 * lw, 401, noise, seed);
    };
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int clean_ok = 0;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        NotchParameters p;
        p.f_r_hz = 3e9 + 5e9 * u(rng);
        p.q_l = std::pow(10.0, 4.0 + 2.0 * u(rng));
        p.q_c_mag = p.q_l * (1.2 + 8.0 * u(rng));
        p.phi = -0.5 + u(rng);
        p.a = 0.1 + 1.9 * u(rng);
        p.alpha = -kPi + kTwoPi * u(rng);
        p.tau_s = 1e-8 + 9e-8 * u(rng);
        const auto f = circle_fit(trace_for(p, 0.0, 0)).params;
        const double e = std::max({rel_err(f.f_r_hz, p.f_r_hz), rel_err(f.q_l, p.q_l), rel_err(f.q_c_mag, p.q_c_mag),
                                   rel_err(f.a, p.a), rel_err(f.tau_s, p.tau_s), angle_err(f.phi, p.phi),
                                   angle_err(f.alpha, p.alpha)});
        worst = std::max(worst, e);
        clean_ok += e < kCircleParamTol;
    }
    int noisy_ok = 0;
    double worst_qi = 0.0;
    constexpr int kNoisy = 20;
    for (std::uint64_t seed = 1; seed <= kNoisy; ++seed) {
        NotchParameters p{0.8, 0.4, 50e-9, 4.11e9, 0.0, 6e5, 0.1};
        p.q_l = ql_from_qi(6.2e5, p.q_c_mag, p.phi);
        const auto f = circle_fit(trace_for(p, kNoiseRelAmplitude * p.a, seed));
        const double e = rel_err(f.q_i, 6.2e5);
        worst_qi = std::max(worst_qi, e);
        noisy_ok += e < kNoisyQiTol;
    }
    return {clean_ok == 100 && noisy_ok == kNoisy,
            "noiseless " + std::to_string(clean_ok) + "/100 within " + num(kCircleParamTol) + " (worst " +
                num(worst, 3) + "), -80 dB near-critical Q_i " + std::to_string(noisy_ok) + "/" +
                std::to_string(kNoisy) + " within 5% (worst " + num(100 * worst_qi, 3) + "%)"};
}

Outcome tunneling() {
    using namespace analysis;
    const TunnelingParameters truth{2e-7, 2.0, 0.3, 2e-7};
    constexpr double kFr = 4.11e9;
    constexpr double kT = 0.010;
    auto data = [&](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 0.01);
        std::vector<QiPoint> out;
        for (int i = 0; i < 401; ++i) {
            const double n = 0.1 * std::pow(1e4, i / 400.0);
            out.push_back({n, (1.0 / tunneling_loss(truth, n, kFr, kT)) * (1.0 + normal(rng))});
        }
        return out;
    };
    auto within = [&](const TunnelingFitResult& f) {
        return std::max({rel_err(f.f_delta0_tls, truth.f_delta0_tls), rel_err(f.n_c, truth.n_c),
                         rel_err(f.beta, truth.beta), rel_err(f.delta0, truth.delta0)});
    };
    const auto pts = data(1);
    const auto free_fit = fit_tunneling_model(pts, kFr, kT, true);
    const auto fixed_fit = fit_tunneling_model(pts, kFr, kT, false);
    const double e = within(free_fit);

    constexpr int kTrials = 100;
    int mc_ok = 0;
    int mc_chi2 = 0;
    for (std::uint64_t seed = 1; seed <= kTrials; ++seed) {
        const auto p = data(seed);
        const auto f = fit_tunneling_model(p, kFr, kT, true);
        const auto g = fit_tunneling_model(p, kFr, kT, false);
        mc_ok += within(f) < kTunnelingTol;
        mc_chi2 += f.chi2 < g.chi2;
    }
    const double rate = static_cast<double>(mc_ok) / kTrials;
    const bool ok = e < kTunnelingTol && free_fit.chi2 < fixed_fit.chi2 && rate >= kTunnelingMcRateMin &&
                    mc_chi2 == kTrials;
    return {ok, "seed 1: worst parameter error " + num(100 * e, 3) + "% (< 10%), chi2 free " + num(free_fit.chi2) +
                    " vs beta=0.5 " + num(fixed_fit.chi2) + "; Monte-Carlo " + std::to_string(mc_ok) + "/" +
                    std::to_string(kTrials) + " within 10% (>= " + num(100 * kTunnelingMcRateMin) +
                    "%), free beats fixed " + std::to_string(mc_chi2) + "/" + std::to_string(kTrials)};
}

Outcome invariants() {
    // Linear resonator: no mixing.
    auto lin = standard_model();
    lin.kappa_tls_hz = 0.0;
    const auto dl = resonant_drive(lin, 1e3);
    const auto comb = DetectionComb::for_drive(dl, 31);
    const auto rl = simulate_two_tone(lin, dl, comb, SimulationConfig{});
    const double p_drive = std::norm(rl.output.amplitude(comb.position(1)));
    double linear_worst = 0.0;
    for (int k = -15; k <= 15; ++k) {
        if (k == 1 || k == -1) continue;
        linear_worst = std::max(linear_worst, std::norm(rl.output.amplitude(comb.position(k))) / p_drive);
    }

    // Nonlinear resonator: even bins empty.
    double even_worst = 0.0;
    for (const auto& m : {standard_model(), harmonic_balance_model()}) {
        for (double n : {2.0, 1e3, 1e5}) {
            const auto d = resonant_drive(m, n);
            const auto r = simulate_two_tone(m, d, comb, SimulationConfig{});
            double strongest = 0.0;
            for (int k = 3; k <= 15; k += 2)
                strongest = std::max({strongest, std::norm(r.output.amplitude(comb.position(k))),
                                      std::norm(r.output.amplitude(comb.position(-k)))});
            for (int k = -14; k <= 14; k += 2)
                even_worst = std::max(even_worst, std::norm(r.output.amplitude(comb.position(k))) / strongest);
        }
    }

    // Demodulation of synthetic tones.
    double ortho_worst = 0.0;
    const DetectionComb c{4.11e9, 50.0, 31};
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int m = -15; m <= 15; ++m) {
        const Complex amp{g(rng), g(rng)};
        TimeSeries ts{0.37, c.period_s() / 1024, {}};
        for (int j = 0; j < 1024; ++j)
            ts.samples.push_back(amp * std::polar(1.0, kTwoPi * (c.frequency(m) - c.f_center_hz) * (ts.t0_s + j * ts.dt_s)));
        const auto s = demodulate(ts, c, c.f_center_hz);
        for (int k = -15; k <= 15; ++k) {
            const Complex want = k == m ? amp : Complex{};
            ortho_worst = std::max(ortho_worst, std::abs(s.amplitude(c.position(k)) - want) / std::abs(amp));
        }
    }
    const bool ok = linear_worst < kLinearImpRatio && even_worst < kEvenBinRatio && ortho_worst < kOrthogonalityTol;
    return {ok, "linear IMP/drive " + num(linear_worst, 3) + " (< 1e-10), even/strongest IMP " + num(even_worst, 3) +
                    " (< 1e-8), demodulation leakage " + num(ortho_worst, 3) + " (< 1e-12)"};
}

Outcome determinism() {
    const fs::path root = fs::path(TLSIMP_TEST_TMP) / "determinism";
    fs::remove_all(root);
    const std::string model =
        R"("model": {"f0_hz": 4.11e9, "kappa0_hz": 860, "kappa_ext_hz": 6770, "kappa_tls_hz": 3950, "a_c": 1.414, "beta": 0.3})";
    const std::vector<std::string> configs{
        R"({"kind": "sweep-power", "seed": 5, )" + model + R"(, "sweep": {"photons_min": 200, "photons_max": 2e5, "points": 6}})",
        R"({"kind": "simulate", "seed": 5, )" + model + R"(, "drive": {"photons": 50}, "simulation": {"noise_dbc": -60}})",
        R"({"kind": "roundtrip", "seed": 5, )" + model +
            R"(, "simulation": {"noise_dbc": -90}, "reconstruction": {"kappa_ext_guess_hz": 5000, "kappa0_hz": 860}})",
        R"({"kind": "generate-s21", "seed": 5, "generate_s21": {"f_r_hz": 4.11e9, "q_l": 2e5, "q_c_mag": 4e5,
            "f_start_hz": 4.1099e9, "f_stop_hz": 4.1101e9, "points": 401, "noise_std": 1e-3}})"};
    int compared = 0;
    int identical = 0;
    bool hashes = true;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto dir = root / std::to_string(i);
        const auto a = run_text(configs[i], dir, dir / "first");
        const auto b = run_text(configs[i], dir, dir / "second");
        hashes = hashes && a.config_hash == b.config_hash && a.outputs == b.outputs;
        for (const auto& f : a.outputs) {
            if (f == "run-manifest.json") continue;
            ++compared;
            identical += io::read_text(dir / "first" / f) == io::read_text(dir / "second" / f);
        }
    }
    return {hashes && identical == compared && compared > 0,
            std::to_string(identical) + "/" + std::to_string(compared) +
                " output files byte-identical over 4 experiment kinds, config hashes " + (hashes ? "equal" : "differ")};
}

}  // namespace

int main() {
    report(1, "power-sweep IMP slopes", slopes);
    report(2, "beta scan of the 3rd-order slope", beta_scan);
    report(3, "IMP spectroscopy shape", spectroscopy);
    report(4, "harmonic-balance roundtrip", roundtrip);
    report(5, "circle-fit property suite", circle_fits);
    report(6, "tunnelling-model fit", tunneling);
    report(7, "parity, linearity and orthogonality", invariants);
    report(8, "determinism of experiment runs", determinism);
    std::printf("%s: %d of 8 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
