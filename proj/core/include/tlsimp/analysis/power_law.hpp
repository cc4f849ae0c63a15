#pragma once

#include <cstddef>
#include <span>

namespace tlsimp::analysis {

struct PowerLawPoint {
    double photons = 0.0;
    double power = 0.0;
};

/// power = photons^k * 10^l over [n_min, n_max].
struct PowerLawFit {
    double k = 0.0;
    double l = 0.0;
    double stderr_k = 0.0;
    double stderr_l = 0.0;
    double n_min = 0.0;
    double n_max = 0.0;
    std::size_t points_used = 0;
};

/// Ordinary least squares of log10(power) on log10(photons), restricted to
/// points with n_min <= photons <= n_max. Needs at least four such points
/// with positive power.
[[nodiscard]] PowerLawFit fit_power_law(std::span<const PowerLawPoint> points, double n_min, double n_max);

}  // namespace tlsimp::analysis
