#pragma once

#include "tlsimp/physics.hpp"

namespace tlsimp::testing {

/// Standard-model column of the reference parameter table.
inline ResonatorModel standard_model() {
    return ResonatorModel{4.11e9, 860.0, 6770.0, 3950.0, 1.414, 0.3};
}

/// Harmonic-balance column of the reference parameter table.
inline ResonatorModel harmonic_balance_model() {
    return ResonatorModel{4.11e9, 860.0, 6620.0, 5220.0, 1.641, 0.3};
}

inline DriveComb resonant_drive(const ResonatorModel& model, double photons) {
    DriveComb d;
    d.f_center_hz = model.f0_hz;
    d.delta_hz = 100.0;
    d.amplitude = drive_for_photon_number(model, photons);
    return d;
}

inline double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace tlsimp::testing
