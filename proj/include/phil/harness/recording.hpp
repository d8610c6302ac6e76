#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phil/coupling.hpp"
#include "phil/harness/config.hpp"
#include "phil/transport.hpp"

namespace phil {

/// Link statistics of one endpoint at the end of a run: sent/dropped count
/// its outgoing frames, the rest its incoming ones.
struct LinkCounters {
    std::string endpoint;
    TransportCounters counters;
    std::uint64_t substituted = 0;
};

/// Time series of one scenario run. Every channel holds one entry per step
/// in memory; decimation only applies when waveforms are exported.
struct Recording {
    std::string name;
    Real dt = 0.0;
    Real horizon = 0.0;
    Real warmup = 0.0;
    std::uint64_t steps = 0;
    std::size_t decimation = 1;
    std::uint64_t seed = 0;
    bool droop_enabled = false;
    ItmVariant itm = ItmVariant::raw;
    std::vector<std::string> channels;

    // Grid side.
    std::vector<Real> f_grid;
    std::vector<Real> p_pcc;
    std::vector<Real> q_pcc;
    std::vector<Real> v_rms_pcc;
    std::vector<Real> v_rms_n1;
    std::vector<Real> v_rms_n2;
    std::vector<Real> v_rms_n3;
    std::vector<Vector3<Real>> i_abc_pcc; ///< current received by the grid
    std::vector<Vector3<Real>> v_abc_pcc; ///< voltage sent by the grid

    // Microgrid side.
    std::vector<Real> f_m;
    std::vector<Real> v_m;
    std::vector<Real> p_ref;
    std::vector<Real> q_ref;
    std::vector<Vector3<Real>> v_raw;
    std::vector<Vector3<Real>> v_clean;
    std::vector<Vector3<Real>> i_total;
    std::vector<Vector3<Real>> loadbank_p;
    std::vector<Vector3<Real>> loadbank_q;

    std::vector<LinkCounters> counters;
    std::size_t quantization_violations = 0;
    /// Step times at which grid events and load-bank overrides took effect.
    std::vector<Real> event_times;

    Real time(std::uint64_t step) const { return static_cast<Real>(step) * dt; }
    std::uint64_t step_at(Real t) const;

    /// Allocates every channel for `steps` samples.
    void reserve(std::uint64_t steps);
};

} // namespace phil
