#include "tlsimp/demodulation.hpp"

#include <cmath>
#include <string>

#include "tlsimp/errors.hpp"

namespace tlsimp {

namespace {

constexpr double kIntegerCycleTol = 1e-8;

bool near_integer(double x) { return std::abs(x - std::round(x)) <= kIntegerCycleTol * std::max(1.0, std::abs(x)); }

}  // namespace

ComplexSpectrum demodulate(const TimeSeries& series, const DetectionComb& comb, double frame_hz) {
    comb.validate();
    if (series.samples.empty() || !(series.dt_s > 0.0))
        throw ValidationError("demodulate: empty series or non-positive sample interval");

    const double window = series.window_s();
    if (!near_integer(window * comb.spacing_hz))
        throw ValidationError("demodulate: window of " + std::to_string(window) +
                              " s is not an integer number of comb periods");

    const auto freqs = comb.frequencies();
    std::vector<Complex> amps(freqs.size());
    const auto n = static_cast<double>(series.samples.size());
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        const double offset = freqs[k] - frame_hz;
        if (!near_integer(offset * window))
            throw ValidationError("demodulate: comb offset " + std::to_string(offset) +
                                  " Hz does not complete an integer number of cycles in the window");
        // Phase in cycles, reduced before scaling by 2*pi.
        const double start_cycles = offset * series.t0_s;
        const double step_cycles = offset * series.dt_s;
        Complex acc{0.0, 0.0};
        for (std::size_t j = 0; j < series.samples.size(); ++j) {
            double cycles = start_cycles + step_cycles * static_cast<double>(j);
            cycles -= std::floor(cycles);
            acc += series.samples[j] * std::polar(1.0, -kTwoPi * cycles);
        }
        amps[k] = acc / n;
    }
    return ComplexSpectrum(Frame::rotating(frame_hz), freqs, std::move(amps));
}

}  // namespace tlsimp
