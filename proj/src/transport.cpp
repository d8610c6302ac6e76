#include "phil/transport.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <numeric>
#include <thread>

namespace phil {

std::string to_string(TransportMode mode) {
    switch (mode) {
    case TransportMode::in_process:
        return "in-process";
    case TransportMode::udp:
        return "udp";
    case TransportMode::loopback:
        return "loopback";
    }
    return "in-process";
}

TransportMode parse_transport_mode(const std::string& name) {
    if (name == "in-process" || name == "in_process")
        return TransportMode::in_process;
    if (name == "udp")
        return TransportMode::udp;
    if (name == "loopback")
        return TransportMode::loopback;
    throw ConfigError("unknown transport mode '" + name + "' (expected in-process, udp or loopback)");
}

void TransportConfig::validate() const {
    if (!(loss_probability >= 0.0 && loss_probability <= 1.0))
        throw ConfigError("transport.loss_probability must lie in [0, 1]");
    if (!(deadline_fraction > 0.0))
        throw ConfigError("transport.deadline_fraction must be positive");
    if (mode == TransportMode::udp && grid_port == microgrid_port)
        throw ConfigError("transport ports must differ");
}

LossInjector::LossInjector(Real probability, std::uint64_t seed, std::uint64_t stream, std::uint32_t max_burst)
    : m_dist(std::clamp(probability, 0.0, 1.0)), m_max_burst(max_burst) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    m_rng.seed(seq);
}

bool LossInjector::drop() {
    // Always consume one draw so the pattern does not depend on the cap.
    const bool lost = m_dist(m_rng);
    if (lost && (m_max_burst == 0 || m_burst < m_max_burst)) {
        ++m_burst;
        return true;
    }
    m_burst = 0;
    return false;
}

void SequencedMailbox::offer(const InterfaceFrame& frame) {
    if (m_last_delivered) {
        if (frame.seq == *m_last_delivered) {
            ++m_duplicate;
            return;
        }
        if (frame.seq < *m_last_delivered) {
            ++m_stale;
            return;
        }
    }
    if (!m_frames.emplace(frame.seq, frame).second)
        ++m_duplicate;
}

bool SequencedMailbox::contains_step(std::uint64_t step_index) const {
    for (const auto& [seq, f] : m_frames) {
        if (f.step_index == step_index)
            return true;
    }
    return false;
}

std::optional<InterfaceFrame> SequencedMailbox::take(std::uint64_t step_index) {
    std::optional<InterfaceFrame> found;
    for (auto it = m_frames.begin(); it != m_frames.end();) {
        if (it->second.step_index < step_index) {
            ++m_stale;
            it = m_frames.erase(it);
        } else if (it->second.step_index == step_index) {
            found = it->second;
            m_last_delivered = it->first;
            it = m_frames.erase(it);
        } else {
            ++it;
        }
    }
    return found;
}

namespace {

constexpr auto kPeerTimeout = std::chrono::seconds(30);

/// One direction of the in-process link.
struct Channel {
    std::mutex mutex;
    std::condition_variable cv;
    std::map<std::uint64_t, FrameBytes> pending;
    std::optional<std::uint64_t> progress;
    bool closed = false;
};

class InProcessLink final : public FrameLink {
public:
    InProcessLink(std::shared_ptr<Channel> out, std::shared_ptr<Channel> in, const TransportConfig& config,
                  std::uint64_t stream)
        : m_out(std::move(out)), m_in(std::move(in)), m_extra(config.extra_delay_steps),
          m_loss(config.loss_probability, config.rng_seed, stream, config.max_loss_burst), m_log_frames(config.log_frames) {}

    ~InProcessLink() override { close(); }

    void send(const InterfaceFrame& frame) override {
        const auto bytes = encode_frame(frame);
        const bool lost = m_loss.drop();
        {
            std::lock_guard lock(m_out->mutex);
            if (m_out->progress && frame.step_index <= *m_out->progress)
                throw TransportError("frames must be sent once per step in step order");
            if (!lost)
                m_out->pending.emplace(frame.step_index, bytes);
            m_out->progress = frame.step_index;
        }
        m_out->cv.notify_all();
        ++m_counters.sent;
        if (lost)
            ++m_counters.dropped;
        if (m_log_frames)
            m_log.push_back(bytes);
    }

    std::optional<InterfaceFrame> recv_for_step(std::uint64_t step) override {
        if (step < 1 + m_extra)
            return std::nullopt;
        const std::uint64_t source_step = step - 1 - m_extra;

        std::unique_lock lock(m_in->mutex);
        const bool ready = m_in->cv.wait_for(lock, kPeerTimeout, [&] {
            return (m_in->progress && *m_in->progress >= source_step) || m_in->closed;
        });
        if (!ready)
            throw TransportError("timed out waiting for peer frame at step " + std::to_string(step));
        if (!m_in->progress || *m_in->progress < source_step)
            throw TransportError("peer closed before step " + std::to_string(step));

        std::optional<FrameBytes> bytes;
        for (auto it = m_in->pending.begin(); it != m_in->pending.end() && it->first <= source_step;) {
            if (it->first == source_step)
                bytes = it->second;
            it = m_in->pending.erase(it);
        }
        lock.unlock();

        if (!bytes) {
            ++m_counters.missing;
            return std::nullopt;
        }
        ++m_counters.delivered;
        return decode_frame(*bytes);
    }

    void close() override {
        {
            std::lock_guard lock(m_out->mutex);
            m_out->closed = true;
        }
        m_out->cv.notify_all();
    }

    TransportCounters counters() const override { return m_counters; }
    const std::vector<FrameBytes>& sent_log() const override { return m_log; }

private:
    std::shared_ptr<Channel> m_out;
    std::shared_ptr<Channel> m_in;
    std::uint64_t m_extra;
    LossInjector m_loss;
    bool m_log_frames;
    TransportCounters m_counters;
    std::vector<FrameBytes> m_log;
};

} // namespace

LinkPair make_in_process_pair(const TransportConfig& config) {
    config.validate();
    auto to_microgrid = std::make_shared<Channel>();
    auto to_grid = std::make_shared<Channel>();
    return {std::make_unique<InProcessLink>(to_microgrid, to_grid, config, 1),
            std::make_unique<InProcessLink>(to_grid, to_microgrid, config, 2)};
}

DelayReport measure_loopback_delay(std::size_t probes, Real dt, const TransportConfig& config) {
    if (!(dt > 0.0))
        throw ConfigError("benchmark dt must be positive");
    if (probes == 0)
        throw ConfigError("benchmark needs at least one probe");

    LinkPair links = config.mode == TransportMode::udp ? make_udp_pair(config, dt) : make_in_process_pair(config);
    FrameLink& initiator = *links.grid;
    FrameLink& echo = *links.microgrid;

    // payload = (probe send step, probe flag, unused)
    std::atomic<bool> done{false};
    std::thread peer([&echo, &done] {
        try {
            for (std::uint64_t k = 0; !done; ++k) {
                auto frame = echo.recv_for_step(k);
                InterfaceFrame out{static_cast<std::uint32_t>(k), k, FrameKind::current, {0.0, 0.0, 0.0}};
                if (frame && frame->payload[1] == 1.0)
                    out.payload = frame->payload;
                echo.send(out);
            }
        } catch (const TransportError&) {
            // initiator finished
        }
        echo.close();
    });

    DelayReport report;
    report.dt = dt;
    report.probe_steps.assign(probes, std::nullopt);
    std::size_t outstanding = probes;
    const std::uint64_t last_step = probes - 1 + kProbeTimeoutSteps;
    try {
        for (std::uint64_t k = 0; k <= last_step && outstanding > 0; ++k) {
            if (auto frame = initiator.recv_for_step(k); frame && frame->payload[1] == 1.0) {
                const auto sent = static_cast<std::uint64_t>(frame->payload[0]);
                if (sent < probes && !report.probe_steps[sent]) {
                    report.probe_steps[sent] = k - sent;
                    --outstanding;
                }
            }
            InterfaceFrame probe{static_cast<std::uint32_t>(k), k, FrameKind::voltage, {0.0, 0.0, 0.0}};
            if (k < probes)
                probe.payload = {static_cast<Real>(k), 1.0, 0.0};
            initiator.send(probe);
        }
    } catch (...) {
        done = true;
        initiator.close();
        peer.join();
        throw;
    }
    done = true;
    initiator.close();
    peer.join();

    std::vector<Real> delays;
    for (const auto& d : report.probe_steps) {
        if (d)
            delays.push_back(static_cast<Real>(*d));
    }
    report.received = delays.size();
    report.lost = probes - delays.size();
    if (!delays.empty()) {
        report.min_steps = static_cast<std::uint64_t>(*std::min_element(delays.begin(), delays.end()));
        report.max_steps = static_cast<std::uint64_t>(*std::max_element(delays.begin(), delays.end()));
        report.mean_steps = std::accumulate(delays.begin(), delays.end(), 0.0) / static_cast<Real>(delays.size());
        Real var = 0.0;
        for (Real d : delays)
            var += (d - report.mean_steps) * (d - report.mean_steps);
        report.variance_steps = var / static_cast<Real>(delays.size());
    }
    return report;
}

} // namespace phil
