#include "tlsimp/spectrum.hpp"

#include <cmath>

#include "tlsimp/errors.hpp"

namespace tlsimp {

ComplexSpectrum::ComplexSpectrum(Frame frame, std::vector<double> frequencies_hz, std::vector<Complex> amplitudes)
    : frame_(frame), frequencies_(std::move(frequencies_hz)), amplitudes_(std::move(amplitudes)) {
    if (frequencies_.size() != amplitudes_.size())
        throw ValidationError("spectrum: frequency and amplitude counts differ");
    for (std::size_t i = 0; i < frequencies_.size(); ++i) {
        if (!std::isfinite(frequencies_[i])) throw ValidationError("spectrum: non-finite frequency");
        if (i > 0 && !(frequencies_[i] > frequencies_[i - 1]))
            throw ValidationError("spectrum: frequencies must be strictly increasing");
    }
}

ComplexSpectrum ComplexSpectrum::zeros(Frame frame, std::vector<double> frequencies_hz) {
    std::vector<Complex> amps(frequencies_hz.size());
    return ComplexSpectrum(frame, std::move(frequencies_hz), std::move(amps));
}

std::optional<std::size_t> ComplexSpectrum::find(double f_hz, double tol_hz) const {
    for (std::size_t i = 0; i < frequencies_.size(); ++i) {
        if (std::abs(frequencies_[i] - f_hz) <= tol_hz) return i;
    }
    return std::nullopt;
}

ComplexSpectrum ComplexSpectrum::in_frame(Frame frame) const {
    ComplexSpectrum out = *this;
    out.frame_ = frame;
    return out;
}

bool ComplexSpectrum::same_grid(const ComplexSpectrum& other, double tol_hz) const {
    if (!(frame_ == other.frame_) || size() != other.size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
        if (std::abs(frequencies_[i] - other.frequencies_[i]) > tol_hz) return false;
    }
    return true;
}

ComplexSpectrum ComplexSpectrum::axpy(Complex scale, const ComplexSpectrum& other) const {
    if (!same_grid(other)) throw ValidationError("spectrum: frame or frequency grid mismatch");
    ComplexSpectrum out = other;
    for (std::size_t i = 0; i < size(); ++i) out.amplitudes_[i] = scale * amplitudes_[i] + other.amplitudes_[i];
    return out;
}

}  // namespace tlsimp
