#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <thread>

#include "phil/transport.hpp"

namespace phil {

namespace {

sockaddr_in make_address(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw ConfigError("invalid IPv4 address '" + host + "'");
    return addr;
}

std::string errno_text(const char* what) {
    return std::string(what) + ": " + std::strerror(errno);
}

class UdpLink final : public FrameLink {
public:
    UdpLink(const TransportConfig& config, Real dt, std::uint16_t local_port, std::uint16_t remote_port,
            std::uint64_t stream)
        : m_extra(config.extra_delay_steps),
          m_deadline(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
              std::chrono::duration<Real>(config.deadline_fraction * dt))),
          m_loss(config.loss_probability, config.rng_seed, stream, config.max_loss_burst), m_log_frames(config.log_frames),
          m_remote(make_address(config.host, remote_port)) {
        m_fd = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (m_fd < 0)
            throw TransportError(errno_text("socket"));
        const sockaddr_in local = make_address(config.host, local_port);
        if (::bind(m_fd, reinterpret_cast<const sockaddr*>(&local), sizeof(local)) != 0) {
            const auto msg = errno_text("bind");
            ::close(m_fd);
            throw TransportError(msg + " (port " + std::to_string(local_port) + ")");
        }
        m_rx = std::thread([this] { receive_loop(); });
    }

    ~UdpLink() override {
        m_stop = true;
        if (m_rx.joinable())
            m_rx.join();
        ::close(m_fd);
    }

    void send(const InterfaceFrame& frame) override {
        const auto bytes = encode_frame(frame);
        ++m_counters.sent;
        if (m_log_frames)
            m_log.push_back(bytes);
        if (m_loss.drop()) {
            ++m_counters.dropped;
            return;
        }
        const auto n = ::sendto(m_fd, bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(&m_remote),
                                sizeof(m_remote));
        if (n != static_cast<ssize_t>(bytes.size()))
            throw TransportError(errno_text("sendto"));
    }

    std::optional<InterfaceFrame> recv_for_step(std::uint64_t step) override {
        if (step < 1 + m_extra)
            return std::nullopt;
        const std::uint64_t source_step = step - 1 - m_extra;
        std::unique_lock lock(m_mutex);
        m_cv.wait_for(lock, m_deadline, [&] { return m_mailbox.contains_step(source_step); });
        auto frame = m_mailbox.take(source_step);
        if (frame)
            ++m_counters.delivered;
        else
            ++m_counters.missing;
        return frame;
    }

    void close() override {}

    TransportCounters counters() const override {
        std::lock_guard lock(m_mutex);
        TransportCounters c = m_counters;
        c.duplicate = m_mailbox.duplicate();
        c.stale = m_mailbox.stale();
        c.corrupt = m_corrupt;
        return c;
    }

    const std::vector<FrameBytes>& sent_log() const override { return m_log; }

private:
    void receive_loop() {
        std::array<std::uint8_t, 512> buffer{};
        pollfd pfd{m_fd, POLLIN, 0};
        while (!m_stop) {
            if (::poll(&pfd, 1, 20) <= 0)
                continue;
            const auto n = ::recv(m_fd, buffer.data(), buffer.size(), 0);
            if (n <= 0)
                continue;
            try {
                const auto frame = decode_frame(std::span<const std::uint8_t>(buffer.data(), static_cast<std::size_t>(n)));
                {
                    std::lock_guard lock(m_mutex);
                    m_mailbox.offer(frame);
                }
                m_cv.notify_all();
            } catch (const DecodeError&) {
                std::lock_guard lock(m_mutex);
                ++m_corrupt;
            }
        }
    }

    std::uint64_t m_extra;
    std::chrono::steady_clock::duration m_deadline;
    LossInjector m_loss;
    bool m_log_frames;
    sockaddr_in m_remote;
    int m_fd = -1;

    mutable std::mutex m_mutex;
    std::condition_variable m_cv;
    SequencedMailbox m_mailbox;
    std::uint64_t m_corrupt = 0;
    std::atomic<bool> m_stop{false};
    std::thread m_rx;

    TransportCounters m_counters;
    std::vector<FrameBytes> m_log;
};

} // namespace

std::unique_ptr<FrameLink> make_udp_link(const TransportConfig& config, Real dt, std::uint16_t local_port,
                                         std::uint16_t remote_port, std::uint64_t stream) {
    config.validate();
    return std::make_unique<UdpLink>(config, dt, local_port, remote_port, stream);
}

LinkPair make_udp_pair(const TransportConfig& config, Real dt) {
    return {make_udp_link(config, dt, config.grid_port, config.microgrid_port, 1),
            make_udp_link(config, dt, config.microgrid_port, config.grid_port, 2)};
}

} // namespace phil
