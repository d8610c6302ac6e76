#include "phil/microgrid.hpp"

#include <algorithm>
#include <cmath>

namespace phil {

Real quantize_loadbank_value(Real request) {
    if (!std::isfinite(request))
        throw ConfigError("load bank request must be finite");
    if (request <= 0.0)
        return 0.0;
    const Real max_steps = std::floor(kLoadBankMax / kLoadBankStep);
    const Real steps = std::min(std::floor(request / kLoadBankStep + 0.5), max_steps);
    return steps * kLoadBankStep;
}

bool is_admissible_loadbank_value(Real value) {
    if (!(value >= 0.0) || value > kLoadBankMax)
        return false;
    const Real steps = value / kLoadBankStep;
    return std::abs(steps - std::round(steps)) < 1e-9;
}

std::vector<Real> LoadBankSetting::realized_values() const {
    std::vector<Real> values{p_act, q_act};
    for (int k = 0; k < 3; ++k) {
        if (overridden[k]) {
            values.push_back(p_phase(k));
            values.push_back(q_phase(k));
        }
    }
    return values;
}

bool LoadBankSetting::admissible() const {
    const auto values = realized_values();
    return std::all_of(values.begin(), values.end(), is_admissible_loadbank_value);
}

LoadBankSetting loadbank_quantize(Real p_req, Real q_req) {
    LoadBankSetting s;
    s.p_req = p_req;
    s.q_req = q_req;
    s.p_act = quantize_loadbank_value(p_req);
    s.q_act = quantize_loadbank_value(q_req);
    s.p_phase.setConstant(s.p_act / 3.0);
    s.q_phase.setConstant(s.q_act / 3.0);
    return s;
}

LoadBankSetting with_phase_override(const LoadBankSetting& setting, int phase, Real p_w, Real q_var) {
    if (phase < 0 || phase > 2)
        throw ConfigError("load bank override phase must be a, b or c");
    LoadBankSetting s = setting;
    s.p_phase(phase) = quantize_loadbank_value(p_w);
    s.q_phase(phase) = quantize_loadbank_value(q_var);
    s.overridden[phase] = true;
    return s;
}

ThreePhaseSample impedance_load_current(const Vector3<Real>& p_phase, const Vector3<Real>& q_phase, Real v_nominal_rms,
                                        const ThreePhaseSample& v, Real theta) {
    const Complex v_pos = park_transform(v, theta).phasor();
    const Real v2 = v_nominal_rms * v_nominal_rms;
    ThreePhaseSample i{v.t, Vector3<Real>::Zero()};
    for (int k = 0; k < 3; ++k) {
        const Complex admittance(p_phase(k) / v2, -q_phase(k) / v2);
        i.abc(k) = std::real(admittance * v_pos * std::polar(1.0, theta - k * kPhaseShift<Real>));
    }
    return i;
}

ThreePhaseSample loadbank_current(const LoadBankSetting& setting, const ThreePhaseSample& v, Real theta,
                                  Real v_nominal_rms) {
    return impedance_load_current(setting.p_phase, setting.q_phase, v_nominal_rms, v, theta);
}

PowerPair<Real> profile_sample(const LoadProfile& profile, Real t) {
    if (profile.points.empty())
        throw ConfigError("load profile is empty");
    auto it = std::upper_bound(profile.points.begin(), profile.points.end(), t,
                               [](Real value, const ProfilePoint& p) { return value < p.t; });
    if (it == profile.points.begin())
        return {it->p, it->q};
    --it;
    return {it->p, it->q};
}

void DroopParams::validate() const {
    if (!(k_p >= 0.0) || !(k_q >= 0.0))
        throw ConfigError("droop gains must be non-negative");
    if (!(p_max > 0.0) || !(q_max > 0.0))
        throw ConfigError("droop saturation limits must be positive");
    if (!(f_star > 0.0) || !(v_star > 0.0))
        throw ConfigError("droop nominal frequency and voltage must be positive");
}

PowerPair<Real> droop_setpoint(const DroopParams& d, Real f_m, Real v_m) {
    const Real p = d.p_star + d.k_p * (d.f_star - f_m);
    const Real q = d.q_star + d.k_q * (d.v_star - v_m);
    return {std::clamp(p, -d.p_max, d.p_max), std::clamp(q, -d.q_max, d.q_max)};
}

ThreePhaseSample bess_current_ref(Real p_ref, Real q_ref, Real theta, Real v_m, Real v_floor) {
    if (!(v_m > v_floor))
        return {};
    const Real v_peak = std::numbers::sqrt2 * v_m;
    const Real i_d = (2.0 / 3.0) * p_ref / v_peak;
    const Real i_q = -(2.0 / 3.0) * q_ref / v_peak;
    return inverse_park(DqFrame<Real>{i_d, i_q, 0.0, theta}, theta);
}

Microgrid::Microgrid(MicrogridConfig config)
    : m_config(std::move(config)), m_override_applied(m_config.overrides.size(), false) {
    m_config.bess.droop.validate();
    for (const auto& o : m_config.overrides) {
        if (o.phase < 0 || o.phase > 2)
            throw ConfigError("load bank override phase must be a, b or c");
    }
    std::stable_sort(m_config.overrides.begin(), m_config.overrides.end(),
                     [](const PhaseOverride& a, const PhaseOverride& b) { return a.t < b.t; });
    update_loadbank(0.0);
}

void Microgrid::update_loadbank(Real t) {
    PowerPair<Real> request{};
    if (m_config.residential && !m_config.loadbank_initial_p)
        request = profile_sample(*m_config.residential, m_config.profile_offset_s + t);

    bool changed = !m_last_request || m_last_request->p != request.p || m_last_request->q != request.q;
    for (std::size_t k = 0; k < m_config.overrides.size(); ++k) {
        if (!m_override_applied[k] && m_config.overrides[k].t <= t + 1e-12) {
            m_override_applied[k] = true;
            changed = true;
        }
    }
    if (!changed)
        return;
    m_last_request = request;

    LoadBankSetting s = loadbank_quantize(request.p, request.q);
    if (m_config.loadbank_initial_p) {
        for (int k = 0; k < 3; ++k)
            s = with_phase_override(s, k, (*m_config.loadbank_initial_p)(k));
    }
    for (std::size_t k = 0; k < m_config.overrides.size(); ++k) {
        if (m_override_applied[k]) {
            const auto& o = m_config.overrides[k];
            s = with_phase_override(s, o.phase, o.p_w, o.q_var);
        }
    }
    m_setting = s;
}

MicrogridOutput Microgrid::step(const ThreePhaseSample& v_pcc, Real theta, Real f_m, Real v_m, Real t) {
    update_loadbank(t);
    if (!m_setting.admissible())
        ++m_violations;

    MicrogridOutput out;
    out.i_loadbank = loadbank_current(m_setting, v_pcc, theta, m_config.v_nominal_rms);
    out.i_total = out.i_loadbank;

    if (m_config.heat_pump) {
        const auto hp = profile_sample(*m_config.heat_pump, m_config.profile_offset_s + t);
        out.i_heat_pump = impedance_load_current(Vector3<Real>::Constant(hp.p / 3.0), Vector3<Real>::Constant(hp.q / 3.0),
                                                 m_config.v_nominal_rms, v_pcc, theta);
        out.i_total.abc += out.i_heat_pump.abc;
    }

    auto& bess = m_config.bess;
    if (bess.enabled) {
        bess.last = droop_setpoint(bess.droop, f_m, v_m);
        bess.i_ref = bess_current_ref(bess.last.p, bess.last.q, theta, v_m, 0.1 * bess.droop.v_star);
        out.i_bess = bess.i_ref;
        out.bess_ref = bess.last;
        out.i_total.abc -= bess.i_ref.abc;
    }
    out.i_total.t = v_pcc.t;
    out.i_loadbank.t = out.i_heat_pump.t = out.i_bess.t = v_pcc.t;
    return out;
}

} // namespace phil
