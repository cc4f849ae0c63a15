#pragma once

#include <string>
#include <vector>

#include "tlsimp/physics.hpp"
#include "tlsimp/simulator.hpp"
#include "tlsimp/spectrum.hpp"

namespace tlsimp {

/// IMP orders tabulated by the sweeps.
inline const std::vector<int> kSweepImpOrders{3, 5, 7, 9};

enum class SweepAxis { photons, center_frequency };

/// One two-tone simulation per axis point, merged in axis order.
struct SweepResult {
    SweepAxis axis_kind = SweepAxis::photons;
    std::vector<double> axis;
    std::vector<TwoToneResponse> responses;
    std::vector<int> orders = kSweepImpOrders;
    /// imp_powers[i][j]: |a_out|^2 (photons/s) at comb index +orders[j] for
    /// axis point i, i.e. at (order+1)/2*f2 - (order-1)/2*f1.
    std::vector<std::vector<double>> imp_powers;
    /// |a_out|^2 at the lower drive tone f1 for each axis point.
    std::vector<double> drive_powers;
    /// |a_out/a_in|^2 at f1.
    std::vector<double> drive_transmission;
};

/// Worker threads used by the sweeps; 0 means hardware concurrency.
struct SweepOptions {
    unsigned threads = 0;
};

/// Keeps the template's frequencies and phases and sets the per-tone drive
/// so the linear on-resonance response holds each target photon number.
[[nodiscard]] SweepResult sweep_power(const ResonatorModel& model, const DriveComb& drive_template,
                                      const DetectionComb& comb_template, const SimulationConfig& cfg,
                                      const std::vector<double>& photon_targets, const SweepOptions& opts = {});

/// Steps the drive pair and detection comb through `centers_hz`. An unset
/// cfg.frame_hz follows each centre.
[[nodiscard]] SweepResult sweep_frequency(const ResonatorModel& model, const DriveComb& drive_template,
                                          const DetectionComb& comb_template, const SimulationConfig& cfg,
                                          const std::vector<double>& centers_hz, const SweepOptions& opts = {});

struct BetaSlope {
    double beta = 0.0;
    double k = 0.0;
    double stderr_k = 0.0;
};

/// Third-order IMP power-law slope versus beta, fitted over fit_range
/// (photon numbers) of a power sweep for every beta.
[[nodiscard]] std::vector<BetaSlope> beta_slope_scan(const ResonatorModel& model_template,
                                                     const std::vector<double>& betas,
                                                     const DriveComb& drive_template,
                                                     const DetectionComb& comb_template,
                                                     const SimulationConfig& cfg,
                                                     const std::vector<double>& photon_targets,
                                                     double fit_min, double fit_max,
                                                     const SweepOptions& opts = {});

/// Log-spaced grid of `points` values from lo to hi inclusive.
[[nodiscard]] std::vector<double> log_space(double lo, double hi, int points);

}  // namespace tlsimp
