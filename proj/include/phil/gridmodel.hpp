#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "phil/signals.hpp"

namespace phil {

/// Reduced dynamic equivalent of the campus network: one aggregate swing
/// machine, a Thevenin source seen from the 400 V coupling point, and a
/// three-segment 20 kV radial feeder carrying the measurement nodes.
///
/// Feeder topology, from the source outward:
///
///     source --z_seg-- n3 --z_seg-- n2 --z_seg-- n1 -- (PCC branch)
///
/// so n1 is the station nearest the coupling point and every segment
/// carries the coupling current referred to the medium-voltage side.
struct GridParams {
    Real s_base = 20e6;
    Real f_nom = 50.0;
    Real v_nom_ll = 400.0;     ///< coupling point, line-to-line RMS
    Real v_mv_nom_ll = 20e3;   ///< feeder, line-to-line RMS
    Real h = 3.0;              ///< s
    Real d_damp = 25.0;        ///< pu
    Complex z_thev{0.04, 0.04};  ///< ohm, referred to the 400 V side
    Complex z_seg{0.3, 0.3};     ///< ohm per feeder segment, 20 kV side
    Real p_base_load = 10e6;   ///< W
    Real v_source_pu = 1.0;

    /// Per-phase peak of the nominal coupling-point voltage.
    Real v_nom_phase_peak() const { return v_nom_ll * std::numbers::sqrt2 / std::numbers::sqrt3; }
    Real v_mv_nom_phase_rms() const { return v_mv_nom_ll / std::numbers::sqrt3; }

    void validate() const;
};

enum class GridNode : std::uint8_t { pcc, n1, n2, n3 };

GridNode parse_grid_node(const std::string& name);
std::string to_string(GridNode node);

struct LoadStepEvent {
    std::uint32_t id = 0;
    Real t_event = 0.0;
    Real delta_p = 0.0;
    Real delta_q = 0.0;
    GridNode location = GridNode::pcc;
};

struct GridState {
    Real delta_f = 0.0;
    Real p_load = 0.0;
    Real v_source_pu = 1.0;
    Real t = 0.0;
    Real theta = 0.0;          ///< electrical angle of the source EMF
    Real dispatch = 0.0;       ///< W, constant generation balancing the pre-event load
    std::uint64_t step = 0;
    /// Constant-power loads lumped at n1, n2, n3 (W, var).
    std::array<Complex, 3> node_loads{};
    std::vector<std::uint32_t> applied_events;
};

/// Pre-event equilibrium: node loads p_base_load/3 each and generation
/// dispatch covering load plus the expected exchange.
GridState make_grid_state(const GridParams& params, Real p_exchange0 = 0.0);

/// Forward-Euler step of the aggregate swing equation. `p_exchange` is the
/// power flowing out of the grid into the microgrid. Reactive exchange does
/// not enter the frequency dynamics. Throws DivergenceError beyond 5 Hz.
GridState grid_step(const GridState& state, const GridParams& params, Real p_exchange, Real q_exchange, Real dt);

/// Coupling-point voltage phasor (peak, relative to the source angle) for a
/// positive-sequence current phasor `i_pos` flowing into the microgrid.
Complex pcc_phasor(const GridState& state, const GridParams& params, Complex i_pos);

/// Balanced instantaneous coupling-point voltage at the state's angle.
ThreePhaseSample pcc_voltage(const GridState& state, const GridParams& params, Complex i_pos);

/// Phase RMS voltages (20 kV side, volts) at n1, n2, n3.
std::array<Real, 3> node_voltages(const GridState& state, const GridParams& params, Complex i_pos);

/// Adds the event's load exactly once. Events fire no earlier than t_event.
GridState apply_event(const GridState& state, const LoadStepEvent& e);

/// One-period positive-sequence extraction of the coupling current in the
/// grid's rotating frame.
class PccCurrentEstimator {
public:
    PccCurrentEstimator(Real f_nom, Real dt);

    /// Pushes the received current and returns the updated phasor.
    Complex push(const ThreePhaseSample& i_pcc, Real theta);
    Complex phasor() const { return m_mean.mean(); }

private:
    SlidingMean<Complex> m_mean;
};

} // namespace phil
