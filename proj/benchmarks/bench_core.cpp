#include <benchmark/benchmark.h>

#include "tlsimp/analysis/circle_fit.hpp"
#include "tlsimp/analysis/tunneling.hpp"
#include "tlsimp/reconstruction.hpp"
#include "tlsimp/simulator.hpp"

using namespace tlsimp;

namespace {

ResonatorModel model() { return {4.11e9, 860.0, 6770.0, 3950.0, 1.414, 0.3}; }

DriveComb drive(double photons) {
    const auto m = model();
    return {m.f0_hz, 100.0, drive_for_photon_number(m, photons), 0.0, 0.0};
}

void BM_SimulateTwoTone(benchmark::State& state) {
    const auto m = model();
    const auto d = drive(static_cast<double>(state.range(0)));
    const auto comb = DetectionComb::for_drive(d, 31);
    for (auto _ : state) benchmark::DoNotOptimize(simulate_two_tone(m, d, comb, SimulationConfig{}));
}
BENCHMARK(BM_SimulateTwoTone)->Arg(2)->Arg(1000)->Arg(200000)->Unit(benchmark::kMillisecond);

void BM_BuildAndSolveH(benchmark::State& state) {
    const auto m = model();
    const auto d = drive(m.a_c * m.a_c);
    const auto r = simulate_two_tone(m, d, DetectionComb::for_drive(d, 31), SimulationConfig{});
    const auto spec = recon::intracavity_from_output(r.output, r.drive, m.kappa_ext_hz);
    const int order = static_cast<int>(state.range(0));
    for (auto _ : state) {
        const auto h = recon::build_h_matrix(spec, order);
        benchmark::DoNotOptimize(recon::solve_parameters(h));
    }
}
BENCHMARK(BM_BuildAndSolveH)->Arg(5)->Arg(9)->Unit(benchmark::kMicrosecond);

void BM_Reconstruct(benchmark::State& state) {
    const auto m = model();
    const auto d = drive(m.a_c * m.a_c);
    const auto r = simulate_two_tone(m, d, DetectionComb::for_drive(d, 31), SimulationConfig{});
    recon::ReconstructionOptions o;
    for (auto _ : state) benchmark::DoNotOptimize(recon::reconstruct(r.output, r.drive, 5000.0, o));
}
BENCHMARK(BM_Reconstruct)->Unit(benchmark::kMillisecond);

void BM_CircleFit(benchmark::State& state) {
    const analysis::NotchParameters p{0.8, 0.4, 50e-9, 4.11e9, 2.4e5, 6e5, 0.1};
    const double lw = p.f_r_hz / p.q_l;
    const auto trace =
        analysis::generate_s21(p, p.f_r_hz - 5 * lw, p.f_r_hz + 5 * lw, static_cast<int>(state.range(0)), 1e-4, 1);
    for (auto _ : state) benchmark::DoNotOptimize(analysis::circle_fit(trace));
}
BENCHMARK(BM_CircleFit)->Arg(401)->Arg(4001)->Unit(benchmark::kMillisecond);

void BM_TunnelingFit(benchmark::State& state) {
    const analysis::TunnelingParameters truth{2e-7, 2.0, 0.3, 2e-7};
    std::vector<analysis::QiPoint> pts;
    for (int i = 0; i < 401; ++i) {
        const double n = 0.1 * std::pow(1e4, i / 400.0);
        pts.push_back({n, 1.0 / analysis::tunneling_loss(truth, n, 4.11e9, 0.010) * (1.0 + 0.01 * std::sin(7.0 * i))});
    }
    for (auto _ : state) benchmark::DoNotOptimize(analysis::fit_tunneling_model(pts, 4.11e9));
}
BENCHMARK(BM_TunnelingFit)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
