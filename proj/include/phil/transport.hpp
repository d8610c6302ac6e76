#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "phil/frame.hpp"

namespace phil {

enum class TransportMode { in_process, udp, loopback };

std::string to_string(TransportMode mode);
TransportMode parse_transport_mode(const std::string& name);

struct TransportConfig {
    TransportMode mode = TransportMode::in_process;
    Real loss_probability = 0.0;
    std::uint64_t extra_delay_steps = 0;
    std::uint64_t rng_seed = 1;
    /// Longest run of consecutive drops per direction; 0 leaves runs unbounded.
    std::uint32_t max_loss_burst = 0;
    std::string host = "127.0.0.1";
    std::uint16_t grid_port = 47001;
    std::uint16_t microgrid_port = 47002;
    /// UDP lock-step deadline as a fraction of dt (wall clock).
    Real deadline_fraction = 0.8;
    /// Keep every sent frame's bytes for replay comparison.
    bool log_frames = false;

    void validate() const;
};

struct TransportCounters {
    std::uint64_t sent = 0;
    std::uint64_t dropped = 0;
    std::uint64_t delivered = 0;
    std::uint64_t missing = 0;
    std::uint64_t duplicate = 0;
    std::uint64_t stale = 0;
    std::uint64_t corrupt = 0;
};

/// Seeded Bernoulli drop decisions with an optional cap on burst length.
class LossInjector {
public:
    LossInjector(Real probability, std::uint64_t seed, std::uint64_t stream, std::uint32_t max_burst = 0);

    bool drop();

private:
    std::mt19937_64 m_rng;
    std::bernoulli_distribution m_dist;
    std::uint32_t m_max_burst;
    std::uint32_t m_burst = 0;
};

/// One endpoint of a bidirectional lock-step link. A frame stamped with
/// sender step s is delivered for receiver step s + 1 + extra_delay_steps.
/// send() must be called exactly once per local step, in step order.
class FrameLink {
public:
    virtual ~FrameLink() = default;

    virtual void send(const InterfaceFrame& frame) = 0;

    /// Frame due at local step `step`, or nullopt when it was lost or missed
    /// the deadline. Steps before the pipeline fills return nullopt without
    /// counting as missing.
    virtual std::optional<InterfaceFrame> recv_for_step(std::uint64_t step) = 0;

    /// Marks this endpoint finished; a peer waiting on it gets a TransportError.
    virtual void close() = 0;

    virtual TransportCounters counters() const = 0;
    virtual const std::vector<FrameBytes>& sent_log() const = 0;
};

struct LinkPair {
    std::unique_ptr<FrameLink> grid;
    std::unique_ptr<FrameLink> microgrid;
};

LinkPair make_in_process_pair(const TransportConfig& config);

/// Two UDP endpoints on `host`, grid_port <-> microgrid_port.
LinkPair make_udp_pair(const TransportConfig& config, Real dt);

/// Single UDP endpoint, for running the two subsystems in separate processes.
std::unique_ptr<FrameLink> make_udp_link(const TransportConfig& config, Real dt, std::uint16_t local_port,
                                         std::uint16_t remote_port, std::uint64_t stream);

/// Receive-side re-sequencing buffer keyed by seq. Duplicates and frames
/// older than the last delivered one are discarded and counted.
class SequencedMailbox {
public:
    void offer(const InterfaceFrame& frame);

    /// Removes and returns the frame stamped `step_index`; older frames are
    /// discarded as stale.
    std::optional<InterfaceFrame> take(std::uint64_t step_index);

    bool contains_step(std::uint64_t step_index) const;
    std::uint64_t duplicate() const { return m_duplicate; }
    std::uint64_t stale() const { return m_stale; }
    std::size_t size() const { return m_frames.size(); }

private:
    std::map<std::uint32_t, InterfaceFrame> m_frames;
    std::optional<std::uint32_t> m_last_delivered;
    std::uint64_t m_duplicate = 0;
    std::uint64_t m_stale = 0;
};

struct DelayReport {
    Real dt = 0.0;
    /// Round-trip delay per probe in steps; nullopt marks a lost probe.
    std::vector<std::optional<std::uint64_t>> probe_steps;
    std::uint64_t min_steps = 0;
    std::uint64_t max_steps = 0;
    Real mean_steps = 0.0;
    Real variance_steps = 0.0;
    std::size_t received = 0;
    std::size_t lost = 0;

    Real min_seconds() const { return static_cast<Real>(min_steps) * dt; }
    Real max_seconds() const { return static_cast<Real>(max_steps) * dt; }
    Real mean_seconds() const { return mean_steps * dt; }
};

inline constexpr std::uint64_t kProbeTimeoutSteps = 1000;

/// Sends `probes` probes on consecutive steps through a lock-step link whose
/// peer echoes every received frame on the step it arrives, and reports the
/// step difference between each probe and its echo.
DelayReport measure_loopback_delay(std::size_t probes, Real dt, const TransportConfig& config);

} // namespace phil
