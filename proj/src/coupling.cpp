#include "phil/coupling.hpp"

#include <algorithm>

namespace phil {

std::string to_string(LossPolicy policy) {
    return policy == LossPolicy::zero_fill ? "zero-fill" : "hold-last";
}

LossPolicy parse_loss_policy(const std::string& name) {
    if (name == "zero-fill" || name == "zero_fill")
        return LossPolicy::zero_fill;
    if (name == "hold-last" || name == "hold_last")
        return LossPolicy::hold_last;
    throw ConfigError("unknown loss policy '" + name + "' (expected zero-fill or hold-last)");
}

std::string to_string(ItmVariant variant) {
    return variant == ItmVariant::raw ? "raw" : "dp";
}

ItmVariant parse_itm_variant(const std::string& name) {
    if (name == "raw")
        return ItmVariant::raw;
    if (name == "dp" || name == "dynamic_phasor" || name == "dynamic-phasor")
        return ItmVariant::dynamic_phasor;
    throw ConfigError("unknown ITM variant '" + name + "' (expected raw or dp)");
}

ExchangeEndpoint::ExchangeEndpoint(FrameLink& link, FrameKind send_kind, FrameKind recv_kind, LossPolicy policy,
                                   Real dt)
    : m_link(link), m_send_kind(send_kind), m_recv_kind(recv_kind), m_policy(policy), m_dt(dt) {}

void ExchangeEndpoint::send(const ThreePhaseSample& x, std::uint64_t step) {
    send_frame(InterfaceFrame{0, step, m_send_kind, {x.a(), x.b(), x.c()}});
}

void ExchangeEndpoint::send_frame(InterfaceFrame frame) {
    frame.seq = m_seq++;
    m_link.send(frame);
}

std::optional<InterfaceFrame> ExchangeEndpoint::receive_frame(std::uint64_t step) {
    auto frame = m_link.recv_for_step(step);
    if (frame && frame->kind != m_recv_kind)
        throw DecodeError("expected " + to_string(m_recv_kind) + " frame, received " + to_string(frame->kind));
    return frame;
}

ThreePhaseSample ExchangeEndpoint::receive(std::uint64_t step) {
    const auto frame = receive_frame(step);
    const Real t = step > 0 ? static_cast<Real>(step - 1) * m_dt : 0.0;
    if (frame) {
        ThreePhaseSample x{static_cast<Real>(frame->step_index) * m_dt, frame->payload[0], frame->payload[1],
                           frame->payload[2]};
        if (x.finite()) {
            m_last = x;
            return x;
        }
    }
    ++m_substituted;
    if (m_policy == LossPolicy::zero_fill)
        return {t, Vector3<Real>::Zero()};
    return {t, m_last.abc};
}

ThreePhaseSample ExchangeEndpoint::exchange(const ThreePhaseSample& outgoing, std::uint64_t step) {
    auto received = receive(step);
    send(outgoing, step);
    return received;
}

ThreePhaseSample grid_side_exchange(ExchangeEndpoint& endpoint, const ThreePhaseSample& v_pcc, std::uint64_t step) {
    return endpoint.exchange(v_pcc, step);
}

ThreePhaseSample microgrid_side_exchange(ExchangeEndpoint& endpoint, const ThreePhaseSample& i_total,
                                         std::uint64_t step) {
    return endpoint.exchange(i_total, step);
}

ReconstructorState::ReconstructorState(const PllParams& params, Real dt, std::size_t ma_window)
    : pll(params, dt), ma(ma_window > 0 ? ma_window : samples_per_period(kTwoPi<Real> * params.f_nominal, dt)),
      amplitude_floor(params.floor_fraction * params.v_nominal_peak) {}

ReconstructedVoltage reconstruct_voltage(ReconstructorState& state, const ThreePhaseSample& v_raw, Real dt) {
    const auto locked = pll_step(state.pll, v_raw, dt);
    const Real rms = moving_average_rms(state.ma, v_raw.abc.norm() / std::numbers::sqrt3);
    ReconstructedVoltage out;
    out.v = balanced_from_phasor(Complex(std::numbers::sqrt2 * rms, 0.0), locked.theta, v_raw.t);
    out.theta = locked.theta;
    out.f_est = locked.f_est;
    out.v_rms = rms;
    return out;
}

InterfaceFrame dp_exchange_encode(std::span<const ThreePhaseSample> window, Real omega0, Real dt, FrameKind kind) {
    if (!is_dynamic_phasor(kind))
        throw ConfigError("dp_exchange_encode needs a dp frame kind");
    const std::size_t n = samples_per_period(omega0, dt);
    InterfaceFrame frame{0, 0, kind, {0.0, 0.0, 0.0}};
    if (window.size() < n)
        return frame;
    const auto tail = window.last(n);
    frame.step_index = static_cast<std::uint64_t>(std::llround(tail.back().t / dt));
    std::vector<Real> phase(n);
    std::complex<Real> per_phase[3];
    for (int p = 0; p < 3; ++p) {
        std::transform(tail.begin(), tail.end(), phase.begin(), [p](const ThreePhaseSample& s) { return s.abc(p); });
        per_phase[p] = to_dynamic_phasor<Real>(phase, omega0, dt, tail.front().t).value();
    }
    const auto pos = positive_sequence(per_phase[0], per_phase[1], per_phase[2]);
    frame.payload = {pos.real(), pos.imag(), omega0};
    return frame;
}

std::optional<ThreePhaseSample> dp_exchange_decode(const InterfaceFrame& frame, Real t) {
    if (!is_dynamic_phasor(frame.kind))
        throw DecodeError("dp_exchange_decode received a " + to_string(frame.kind) + " frame");
    if (!std::all_of(frame.payload.begin(), frame.payload.end(), [](Real x) { return std::isfinite(x); }) ||
        frame.payload[2] < 0.0)
        throw DecodeError("malformed dynamic phasor payload");
    if (frame.payload[2] == 0.0)
        return std::nullopt;
    return balanced_from_dynamic_phasor(DynamicPhasor<Real>{frame.payload[0], frame.payload[1], frame.payload[2]}, t);
}

DpEncoder::DpEncoder(Real omega0, Real dt, FrameKind kind) : m_phasor(omega0, dt), m_kind(kind) {
    if (!is_dynamic_phasor(kind))
        throw ConfigError("DpEncoder needs a dp frame kind");
}

InterfaceFrame DpEncoder::encode(const ThreePhaseSample& x) {
    m_phasor.push(x);
    InterfaceFrame frame{0, 0, m_kind, {0.0, 0.0, 0.0}};
    if (m_phasor.ready()) {
        const auto p = m_phasor.positive();
        frame.payload = {p.re, p.im, p.omega0};
    }
    return frame;
}

ThreePhaseSample DpDecoder::decode(const std::optional<InterfaceFrame>& frame, Real t) {
    if (frame) {
        if (frame->kind != m_expected)
            throw DecodeError("expected " + to_string(m_expected) + " frame, received " + to_string(frame->kind));
        if (dp_exchange_decode(*frame, t))
            m_phasor = {frame->payload[0], frame->payload[1], frame->payload[2]};
    }
    if (m_phasor.omega0 == 0.0)
        return {t, Vector3<Real>::Zero()};
    return balanced_from_dynamic_phasor(m_phasor, t);
}

ItmStabilityGuard::ItmStabilityGuard(Real f_nom, Real dt, Real window_s)
    : m_period_len(samples_per_period(kTwoPi<Real> * f_nom, dt)),
      m_periods(static_cast<std::size_t>(std::max(1.0, std::round(window_s * f_nom)))) {}

void ItmStabilityGuard::push(const ThreePhaseSample& i_received, std::uint64_t step) {
    if (m_finished)
        return;
    if (!i_received.finite())
        throw ItmInstabilityError("ITM interface current is not finite", step);
    m_sum_sq += i_received.abc.squaredNorm() / 3.0;
    if (++m_in_period < m_period_len)
        return;
    m_period_rms.push_back(std::sqrt(m_sum_sq / static_cast<Real>(m_period_len)));
    m_sum_sq = 0.0;
    m_in_period = 0;
    if (m_period_rms.size() < m_periods)
        return;

    m_finished = true;
    // Startup transients settle within a few periods; judge the second half.
    const std::size_t from = m_period_rms.size() / 2;
    bool rising = true;
    for (std::size_t k = from + 1; k < m_period_rms.size(); ++k)
        rising = rising && m_period_rms[k] > m_period_rms[k - 1];
    if (rising && m_period_rms.back() > 1.2 * m_period_rms[from])
        throw ItmInstabilityError("ITM interface current grows monotonically during warm-up; "
                                  "source/load impedance ratio makes the coupling unstable",
                                  step);
}

Real interface_phase_error_deg(ItmVariant variant, std::uint64_t delay_steps, Real dt, Real f_nom, Real duration) {
    if (delay_steps == 0)
        throw ConfigError("interface delay must be at least one step");
    TransportConfig config;
    config.extra_delay_steps = delay_steps - 1;
    auto links = make_in_process_pair(config);

    const Real omega0 = kTwoPi<Real> * f_nom;
    const std::size_t n = samples_per_period(omega0, dt);
    const auto steps = static_cast<std::uint64_t>(std::llround(duration / dt));
    if (steps < 2 * n + delay_steps)
        throw ConfigError("interface phase measurement needs at least two periods after the delay");

    const Real amplitude = 230.0 * std::numbers::sqrt2;
    const Real phase0 = 0.3;
    const FrameKind kind = variant == ItmVariant::raw ? FrameKind::voltage : FrameKind::dp_voltage;
    ExchangeEndpoint sender(*links.grid, kind, FrameKind::current, LossPolicy::hold_last, dt);
    ExchangeEndpoint receiver(*links.microgrid, FrameKind::current, kind, LossPolicy::hold_last, dt);
    DpEncoder encoder(omega0, dt, FrameKind::dp_voltage);
    DpDecoder decoder(FrameKind::dp_voltage);

    Complex rx_bin(0.0), ref_bin(0.0);
    for (std::uint64_t k = 0; k < steps; ++k) {
        const Real t = static_cast<Real>(k) * dt;
        const auto x = synth_three_phase(amplitude, f_nom, phase0, t);
        if (variant == ItmVariant::raw) {
            sender.send(x, k);
        } else {
            auto frame = encoder.encode(x);
            frame.step_index = k;
            sender.send_frame(frame);
        }

        ThreePhaseSample y;
        if (variant == ItmVariant::raw)
            y = receiver.receive(k);
        else
            y = decoder.decode(receiver.receive_frame(k), t);

        if (k >= steps - n) {
            const auto rot = std::polar(1.0, -omega0 * t);
            rx_bin += y.a() * rot;
            ref_bin += x.a() * rot;
        }
    }
    return std::abs(std::arg(rx_bin / ref_bin)) * 180.0 / std::numbers::pi;
}

} // namespace phil
