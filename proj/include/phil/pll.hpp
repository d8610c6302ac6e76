#pragma once

#include <span>

#include "phil/signals.hpp"

namespace phil {

struct PllParams {
    Real f_nominal = 50.0;
    /// Per-phase peak amplitude used to place the normalization floor.
    Real v_nominal_peak = 230.0 * std::numbers::sqrt2;
    Real kp = 92.0;   // rad/s per unit vq
    Real ki = 4230.0; // rad/s^2 per unit vq
    Real floor_fraction = 0.1;
    /// Samples in the amplitude window; 0 selects one nominal period.
    std::size_t amplitude_window = 0;
};

/// Synchronous-reference-frame PLL state. The angle path carries no
/// buffering; the amplitude window only scales the error signal.
struct PllState {
    PllState(const PllParams& params, Real dt);

    Real theta = 0.0;
    Real omega_integrator = 0.0;
    Real f_est = 50.0;
    Real omega_nominal;
    Real kp;
    Real ki;
    Real amplitude_floor;
    MovingAverageState<Real> amplitude;
};

struct PllOutput {
    Real theta;  ///< angle of the processed sample
    Real f_est;  ///< Hz, after this step's update
    Real error;  ///< normalized vq fed to the PI (0 while coasting)
};

PllOutput pll_step(PllState& state, const ThreePhaseSample& v, Real dt);

/// True iff every one of the trailing hold/dt estimates lies within `tol`
/// of their mean. Short histories are never locked.
bool pll_lock_check(std::span<const Real> f_history, Real tol, Real hold, Real dt);

} // namespace phil
