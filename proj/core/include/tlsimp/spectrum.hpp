#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tlsimp/physics.hpp"

namespace tlsimp {

/// Reference frame of a spectrum's complex amplitudes.
///
/// Amplitudes are Fourier coefficients of exp(+i*2*pi*(f - ref)*t) with a
/// shared time origin, so retagging a spectrum between frames leaves the
/// amplitude at a given absolute frequency unchanged.
struct Frame {
    enum class Kind { laboratory, rotating };

    Kind kind = Kind::laboratory;
    double ref_hz = 0.0;

    static Frame laboratory() { return Frame{Kind::laboratory, 0.0}; }
    static Frame rotating(double ref_hz) { return Frame{Kind::rotating, ref_hz}; }

    /// Frequency subtracted from absolute frequencies in this frame.
    [[nodiscard]] double offset_hz() const noexcept { return kind == Kind::rotating ? ref_hz : 0.0; }

    friend bool operator==(const Frame&, const Frame&) = default;
};

/// Complex amplitudes on a strictly increasing grid of absolute frequencies.
class ComplexSpectrum {
public:
    ComplexSpectrum() = default;
    ComplexSpectrum(Frame frame, std::vector<double> frequencies_hz, std::vector<Complex> amplitudes);

    /// Zero amplitudes on the given grid.
    static ComplexSpectrum zeros(Frame frame, std::vector<double> frequencies_hz);

    [[nodiscard]] const Frame& frame() const noexcept { return frame_; }
    [[nodiscard]] std::span<const double> frequencies() const noexcept { return frequencies_; }
    [[nodiscard]] std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }
    [[nodiscard]] std::size_t size() const noexcept { return frequencies_.size(); }
    [[nodiscard]] bool empty() const noexcept { return frequencies_.empty(); }

    [[nodiscard]] double frequency(std::size_t i) const { return frequencies_.at(i); }
    [[nodiscard]] Complex amplitude(std::size_t i) const { return amplitudes_.at(i); }
    void set_amplitude(std::size_t i, Complex value) { amplitudes_.at(i) = value; }

    /// Index of the grid point within tol_hz of f_hz.
    [[nodiscard]] std::optional<std::size_t> find(double f_hz, double tol_hz = 1e-6) const;

    /// Same amplitudes, new frame tag.
    [[nodiscard]] ComplexSpectrum in_frame(Frame frame) const;

    /// True when frames match and grids agree point by point.
    [[nodiscard]] bool same_grid(const ComplexSpectrum& other, double tol_hz = 1e-6) const;

    /// Elementwise scale*this + other; throws ValidationError on grid mismatch.
    [[nodiscard]] ComplexSpectrum axpy(Complex scale, const ComplexSpectrum& other) const;

private:
    Frame frame_{};
    std::vector<double> frequencies_;
    std::vector<Complex> amplitudes_;
};

}  // namespace tlsimp
