#include "phil/pll.hpp"

#include <algorithm>
#include <numeric>

namespace phil {

namespace {

std::size_t amplitude_window_len(const PllParams& params, Real dt) {
    if (params.amplitude_window > 0)
        return params.amplitude_window;
    return samples_per_period(kTwoPi<Real> * params.f_nominal, dt);
}

} // namespace

PllState::PllState(const PllParams& params, Real dt)
    : f_est(params.f_nominal), omega_nominal(kTwoPi<Real> * params.f_nominal), kp(params.kp), ki(params.ki),
      amplitude_floor(params.floor_fraction * params.v_nominal_peak), amplitude(amplitude_window_len(params, dt)) {
    if (!(dt > 0.0))
        throw ConfigError("pll: dt must be positive");
    if (!(params.kp > 0.0) || !(params.ki > 0.0))
        throw ConfigError("pll: gains must be positive");
}

PllOutput pll_step(PllState& state, const ThreePhaseSample& v, Real dt) {
    const Real theta = state.theta;
    const auto dq = park_transform(v, theta);

    // Three-phase quadratic mean is ripple-free for a balanced set.
    const Real rms = moving_average_rms(state.amplitude, v.abc.norm() / std::sqrt(3.0));
    const Real instantaneous = dq.magnitude();

    if (instantaneous < state.amplitude_floor) {
        // Coast: hold the frequency estimate, keep the angle turning.
        state.theta = wrap_angle(theta + kTwoPi<Real> * state.f_est * dt);
        return {theta, state.f_est, 0.0};
    }

    const Real norm = std::max({std::numbers::sqrt2 * rms, instantaneous, state.amplitude_floor});
    const Real error = dq.q / norm;
    state.omega_integrator += state.ki * error * dt;
    const Real omega = state.omega_nominal + state.kp * error + state.omega_integrator;
    state.f_est = omega / kTwoPi<Real>;
    state.theta = wrap_angle(theta + omega * dt);
    return {theta, state.f_est, error};
}

bool pll_lock_check(std::span<const Real> f_history, Real tol, Real hold, Real dt) {
    if (!(tol > 0.0) || !(dt > 0.0))
        throw ConfigError("pll_lock_check: tol and dt must be positive");
    const auto n = static_cast<std::size_t>(std::ceil(hold / dt - 1e-9));
    if (n == 0 || f_history.size() < n)
        return false;
    const auto tail = f_history.last(n);
    const Real mean = std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<Real>(n);
    return std::all_of(tail.begin(), tail.end(), [&](Real f) { return std::abs(f - mean) < tol; });
}

} // namespace phil
