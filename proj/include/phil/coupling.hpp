#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phil/pll.hpp"
#include "phil/transport.hpp"

namespace phil {

enum class LossPolicy { zero_fill, hold_last };
enum class ItmVariant { raw, dynamic_phasor };

std::string to_string(LossPolicy policy);
LossPolicy parse_loss_policy(const std::string& name);
std::string to_string(ItmVariant variant);
ItmVariant parse_itm_variant(const std::string& name);

/// One side of the ideal-transformer interface for raw waveform frames.
/// Received samples are stamped with the sender's step time; missing frames
/// are substituted according to the loss policy.
class ExchangeEndpoint {
public:
    ExchangeEndpoint(FrameLink& link, FrameKind send_kind, FrameKind recv_kind, LossPolicy policy, Real dt);

    void send(const ThreePhaseSample& x, std::uint64_t step);
    void send_frame(InterfaceFrame frame);

    ThreePhaseSample receive(std::uint64_t step);
    std::optional<InterfaceFrame> receive_frame(std::uint64_t step);

    /// receive(step) followed by send(outgoing, step).
    ThreePhaseSample exchange(const ThreePhaseSample& outgoing, std::uint64_t step);

    FrameLink& link() { return m_link; }
    std::uint64_t substituted() const { return m_substituted; }

private:
    FrameLink& m_link;
    FrameKind m_send_kind;
    FrameKind m_recv_kind;
    LossPolicy m_policy;
    Real m_dt;
    std::uint32_t m_seq = 0;
    ThreePhaseSample m_last{};
    std::uint64_t m_substituted = 0;
};

/// Grid side: sends the coupling voltage, returns the microgrid current of
/// the previous step.
ThreePhaseSample grid_side_exchange(ExchangeEndpoint& endpoint, const ThreePhaseSample& v_pcc, std::uint64_t step);

/// Microgrid side: sends the total current, returns the raw received voltage.
ThreePhaseSample microgrid_side_exchange(ExchangeEndpoint& endpoint, const ThreePhaseSample& i_total,
                                         std::uint64_t step);

/// PLL angle plus moving-average amplitude rebuilt into a clean balanced
/// voltage.
struct ReconstructorState {
    ReconstructorState(const PllParams& params, Real dt, std::size_t ma_window = 0);

    PllState pll;
    MovingAverageState<Real> ma;
    Real amplitude_floor;
};

struct ReconstructedVoltage {
    ThreePhaseSample v;
    Real theta = 0.0;
    Real f_est = 0.0;
    Real v_rms = 0.0; ///< moving-average phase RMS
};

ReconstructedVoltage reconstruct_voltage(ReconstructorState& state, const ThreePhaseSample& v_raw, Real dt);

/// Positive-sequence dynamic phasor of the trailing one-period window.
/// Windows shorter than one period yield a not-ready frame.
InterfaceFrame dp_exchange_encode(std::span<const ThreePhaseSample> window, Real omega0, Real dt, FrameKind kind);

/// Balanced waveform at the receiver's local time `t`; nullopt for a
/// not-ready frame. Throws DecodeError for non-dp or malformed frames.
std::optional<ThreePhaseSample> dp_exchange_decode(const InterfaceFrame& frame, Real t);

/// Streaming dp sender built on the recursive sliding phasor.
class DpEncoder {
public:
    DpEncoder(Real omega0, Real dt, FrameKind kind);

    InterfaceFrame encode(const ThreePhaseSample& x);

private:
    SlidingPhasor<Real> m_phasor;
    FrameKind m_kind;
};

/// dp receiver holding the last ready phasor across losses and not-ready
/// frames.
class DpDecoder {
public:
    explicit DpDecoder(FrameKind expected) : m_expected(expected) {}

    ThreePhaseSample decode(const std::optional<InterfaceFrame>& frame, Real t);
    const DynamicPhasor<Real>& phasor() const { return m_phasor; }

private:
    FrameKind m_expected;
    DynamicPhasor<Real> m_phasor{};
};

/// Aborts when the received-current RMS grows monotonically over the
/// zero-event warm-up, the signature of an unstable ITM loop.
class ItmStabilityGuard {
public:
    ItmStabilityGuard(Real f_nom, Real dt, Real window_s = 0.5);

    /// Throws ItmInstabilityError at the end of the window if the check fails.
    void push(const ThreePhaseSample& i_received, std::uint64_t step);
    bool finished() const { return m_finished; }
    const std::vector<Real>& period_rms() const { return m_period_rms; }

private:
    std::size_t m_period_len;
    std::size_t m_periods;
    std::size_t m_in_period = 0;
    Real m_sum_sq = 0.0;
    std::vector<Real> m_period_rms;
    bool m_finished = false;
};

/// Open-loop transfer of a stationary 50 Hz set through a lossless link with
/// `delay_steps` total steps of latency. Returns the phase error in degrees
/// of the received waveform against the sender's waveform at the receiver's
/// time, measured over the final period.
Real interface_phase_error_deg(ItmVariant variant, std::uint64_t delay_steps, Real dt, Real f_nom = 50.0,
                               Real duration = 0.2);

} // namespace phil
