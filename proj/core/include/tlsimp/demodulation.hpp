#pragma once

#include <vector>

#include "tlsimp/physics.hpp"
#include "tlsimp/spectrum.hpp"

namespace tlsimp {

/// Uniformly sampled complex envelope a(t0 + j*dt), j = 0..N-1.
struct TimeSeries {
    double t0_s = 0.0;
    double dt_s = 0.0;
    std::vector<Complex> samples;

    [[nodiscard]] double window_s() const noexcept { return dt_s * static_cast<double>(samples.size()); }
};

/// Projects a rotating-frame envelope onto every detection-comb frequency:
/// A_k = (1/N) sum_j a(t_j) exp(-i*2*pi*(f_k - frame)*t_j).
///
/// The window must hold an integer number of cycles of every comb offset
/// f_k - frame; otherwise ValidationError is thrown.
[[nodiscard]] ComplexSpectrum demodulate(const TimeSeries& series, const DetectionComb& comb, double frame_hz);

}  // namespace tlsimp
