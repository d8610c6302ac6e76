#include "phil/gridmodel.hpp"

#include <algorithm>

namespace phil {

namespace {

constexpr Real kDivergenceLimitHz = 5.0;

std::size_t node_index(GridNode node) {
    switch (node) {
    case GridNode::pcc:
    case GridNode::n1:
        return 0;
    case GridNode::n2:
        return 1;
    case GridNode::n3:
        return 2;
    }
    return 0;
}

} // namespace

void GridParams::validate() const {
    if (!(s_base > 0.0))
        throw ConfigError("grid.s_base must be positive");
    if (!(f_nom > 0.0))
        throw ConfigError("grid.f_nom must be positive");
    if (!(v_nom_ll > 0.0) || !(v_mv_nom_ll > 0.0))
        throw ConfigError("grid nominal voltages must be positive");
    if (!(h > 0.0))
        throw ConfigError("grid.h must be positive");
    if (!(d_damp > 0.0))
        throw ConfigError("grid.d_damp must be positive");
    if (!(std::abs(z_thev) > 0.0) || !(std::abs(z_seg) > 0.0))
        throw ConfigError("grid impedances must have non-zero magnitude");
    if (!(p_base_load >= 0.0))
        throw ConfigError("grid.p_base_load must be non-negative");
    if (!(v_source_pu >= 0.8 && v_source_pu <= 1.2))
        throw ConfigError("grid.v_source_pu must lie in [0.8, 1.2]");
}

GridNode parse_grid_node(const std::string& name) {
    if (name == "pcc")
        return GridNode::pcc;
    if (name == "n1")
        return GridNode::n1;
    if (name == "n2")
        return GridNode::n2;
    if (name == "n3")
        return GridNode::n3;
    throw ConfigError("unknown grid node '" + name + "' (expected pcc, n1, n2 or n3)");
}

std::string to_string(GridNode node) {
    switch (node) {
    case GridNode::pcc:
        return "pcc";
    case GridNode::n1:
        return "n1";
    case GridNode::n2:
        return "n2";
    case GridNode::n3:
        return "n3";
    }
    return "pcc";
}

GridState make_grid_state(const GridParams& params, Real p_exchange0) {
    GridState s;
    s.p_load = params.p_base_load;
    s.v_source_pu = params.v_source_pu;
    s.node_loads.fill(Complex(params.p_base_load / 3.0, 0.0));
    s.dispatch = s.p_load + p_exchange0;
    return s;
}

GridState grid_step(const GridState& state, const GridParams& params, Real p_exchange, Real /*q_exchange*/, Real dt) {
    if (!(dt > 0.0))
        throw ConfigError("grid_step: dt must be positive");
    GridState next = state;
    const Real imbalance_pu = (state.dispatch - state.p_load - p_exchange) / params.s_base;
    const Real dfdt = params.f_nom / (2.0 * params.h) * (imbalance_pu - params.d_damp * state.delta_f / params.f_nom);
    next.theta = wrap_angle(state.theta + kTwoPi<Real> * (params.f_nom + state.delta_f) * dt);
    next.delta_f = state.delta_f + dfdt * dt;
    next.t = state.t + dt;
    next.step = state.step + 1;
    if (!std::isfinite(next.delta_f) || std::abs(next.delta_f) > kDivergenceLimitHz)
        throw DivergenceError("grid frequency deviation exceeded 5 Hz", next.step);
    return next;
}

Complex pcc_phasor(const GridState& state, const GridParams& params, Complex i_pos) {
    return state.v_source_pu * params.v_nom_phase_peak() - params.z_thev * i_pos;
}

ThreePhaseSample pcc_voltage(const GridState& state, const GridParams& params, Complex i_pos) {
    return balanced_from_phasor(pcc_phasor(state, params, i_pos), state.theta, state.t);
}

std::array<Real, 3> node_voltages(const GridState& state, const GridParams& params, Complex i_pos) {
    const Complex source = state.v_source_pu * params.v_mv_nom_phase_rms();
    // Coupling current referred to the feeder: peak to RMS, then turns ratio.
    const Complex i_pcc = i_pos / std::numbers::sqrt2 * (params.v_nom_ll / params.v_mv_nom_ll);

    std::array<Complex, 3> v;
    v.fill(source);
    for (int iter = 0; iter < 50; ++iter) {
        std::array<Complex, 3> i_node;
        for (std::size_t k = 0; k < 3; ++k)
            i_node[k] = std::abs(v[k]) > 0.0 ? std::conj(state.node_loads[k] / 3.0 / v[k]) : Complex(0.0);
        const Complex i_seg1 = i_node[0] + i_pcc;   // n2 -> n1
        const Complex i_seg2 = i_node[1] + i_seg1;  // n3 -> n2
        const Complex i_seg3 = i_node[2] + i_seg2;  // source -> n3
        std::array<Complex, 3> updated;
        updated[2] = source - params.z_seg * i_seg3;
        updated[1] = updated[2] - params.z_seg * i_seg2;
        updated[0] = updated[1] - params.z_seg * i_seg1;
        Real change = 0.0;
        for (std::size_t k = 0; k < 3; ++k)
            change = std::max(change, std::abs(updated[k] - v[k]));
        v = updated;
        if (change <= 1e-12 * std::abs(source))
            break;
    }
    return {std::abs(v[0]), std::abs(v[1]), std::abs(v[2])};
}

GridState apply_event(const GridState& state, const LoadStepEvent& e) {
    if (std::find(state.applied_events.begin(), state.applied_events.end(), e.id) != state.applied_events.end())
        throw EventError("load step event " + std::to_string(e.id) + " applied twice");
    if (state.t + 1e-12 < e.t_event)
        throw EventError("load step event " + std::to_string(e.id) + " applied before its time");
    GridState next = state;
    next.applied_events.push_back(e.id);
    next.p_load += e.delta_p;
    next.node_loads[node_index(e.location)] += Complex(e.delta_p, e.delta_q);
    return next;
}

PccCurrentEstimator::PccCurrentEstimator(Real f_nom, Real dt)
    : m_mean(samples_per_period(kTwoPi<Real> * f_nom, dt)) {}

Complex PccCurrentEstimator::push(const ThreePhaseSample& i_pcc, Real theta) {
    return m_mean.push(park_transform(i_pcc, theta).phasor());
}

} // namespace phil
