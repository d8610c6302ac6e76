#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "phil/signals.hpp"

namespace phil {

inline constexpr Real kLoadBankStep = 330.0;
inline constexpr Real kLoadBankMax = 89000.0;

/// Nearest multiple of the 330 W/var step, ties up, negatives clipped to
/// zero, and clipped to the largest admissible multiple not above 89 kW.
Real quantize_loadbank_value(Real request);

bool is_admissible_loadbank_value(Real value);

/// Realized load-bank setting. Balanced settings split the quantized total
/// equally over the phases; an overridden phase carries its own quantized
/// value.
struct LoadBankSetting {
    Real p_req = 0.0;
    Real q_req = 0.0;
    Real p_act = 0.0;
    Real q_act = 0.0;
    Vector3<Real> p_phase = Vector3<Real>::Zero();
    Vector3<Real> q_phase = Vector3<Real>::Zero();
    std::array<bool, 3> overridden{false, false, false};

    /// Values the hardware would actually realize: the balanced totals plus
    /// each overridden phase.
    std::vector<Real> realized_values() const;
    bool admissible() const;
};

LoadBankSetting loadbank_quantize(Real p_req, Real q_req);

/// Copy of `setting` with phase `phase` (0 = a) overridden.
LoadBankSetting with_phase_override(const LoadBankSetting& setting, int phase, Real p_w, Real q_var = 0.0);

/// Per-phase constant-impedance load for per-phase (p, q) at the nominal
/// phase RMS voltage. Only the positive-sequence part of `v` relative to
/// `theta` drives the current.
ThreePhaseSample impedance_load_current(const Vector3<Real>& p_phase, const Vector3<Real>& q_phase, Real v_nominal_rms,
                                        const ThreePhaseSample& v, Real theta);

ThreePhaseSample loadbank_current(const LoadBankSetting& setting, const ThreePhaseSample& v, Real theta,
                                  Real v_nominal_rms = 230.0);

struct ProfilePoint {
    Real t = 0.0;
    Real p = 0.0;
    Real q = 0.0;
};

/// Step-hold load profile.
struct LoadProfile {
    std::vector<ProfilePoint> points;
};

/// Reads the `t_s,p_w,q_var` CSV format. Throws ConfigError on empty,
/// malformed or non-increasing input.
LoadProfile load_profile_csv(const std::filesystem::path& path);
LoadProfile parse_profile_csv(const std::string& text, const std::string& origin = "<memory>");

PowerPair<Real> profile_sample(const LoadProfile& profile, Real t);

struct DroopParams {
    Real k_p = 2e6;      ///< W/Hz
    Real k_q = 50e3;     ///< var/V
    Real f_star = 50.0;
    Real v_star = 230.0; ///< phase RMS
    Real p_star = 0.0;
    Real q_star = 0.0;
    Real p_max = 500e3;
    Real q_max = 500e3;

    void validate() const;
};

/// P_ref = clamp(P* + k_p (f* - f_m)), Q_ref = clamp(Q* + k_q (V* - V_m)).
PowerPair<Real> droop_setpoint(const DroopParams& d, Real f_m, Real v_m);

/// Balanced current injecting (P_ref, Q_ref) into the coupling point at the
/// measured voltage, aligned with the PLL angle. Below `v_floor` the output
/// is zero.
ThreePhaseSample bess_current_ref(Real p_ref, Real q_ref, Real theta, Real v_m, Real v_floor = 23.0);

struct BessState {
    DroopParams droop;
    bool enabled = false;
    PowerPair<Real> last{};
    ThreePhaseSample i_ref{};
};

/// Per-phase load-bank override scheduled on the microgrid side.
struct PhaseOverride {
    Real t = 0.0;
    int phase = 0;
    Real p_w = 0.0;
    Real q_var = 0.0;
};

struct MicrogridConfig {
    std::optional<LoadProfile> residential;
    std::optional<LoadProfile> heat_pump;
    Real profile_offset_s = 0.0;
    Real v_nominal_rms = 230.0;
    /// Per-phase load-bank values applied at t = 0 instead of the balanced
    /// residential split.
    std::optional<Vector3<Real>> loadbank_initial_p;
    std::vector<PhaseOverride> overrides;
    BessState bess;
};

struct MicrogridOutput {
    ThreePhaseSample i_total;
    ThreePhaseSample i_loadbank;
    ThreePhaseSample i_heat_pump;
    ThreePhaseSample i_bess;   ///< injected current, positive into the PCC
    PowerPair<Real> bess_ref{};
};

/// Microgrid-under-test. Positive i_total is drawn from the grid.
class Microgrid {
public:
    explicit Microgrid(MicrogridConfig config);

    MicrogridOutput step(const ThreePhaseSample& v_pcc, Real theta, Real f_m, Real v_m, Real t);

    const LoadBankSetting& loadbank() const { return m_setting; }
    const BessState& bess() const { return m_config.bess; }
    std::size_t quantization_violations() const { return m_violations; }

private:
    void update_loadbank(Real t);

    MicrogridConfig m_config;
    LoadBankSetting m_setting;
    std::vector<bool> m_override_applied;
    std::optional<PowerPair<Real>> m_last_request;
    std::size_t m_violations = 0;
};

/// Free-function form of Microgrid::step.
inline MicrogridOutput microgrid_step(Microgrid& state, const ThreePhaseSample& v_pcc, Real theta, Real f_m, Real v_m,
                                      Real t) {
    return state.step(v_pcc, theta, f_m, v_m, t);
}

} // namespace phil
