#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <thread>

#include "triad/bus.hpp"

namespace triad {

/// 4-byte big-endian payload length, then the canonical envelope bytes.
std::string frame_payload(std::string_view payload);
std::string frame(const Envelope& envelope);

/// Incremental deframer; tolerates arbitrary byte dribbles. Throws
/// TransportError on an oversized length prefix.
class FrameReader {
  public:
    static constexpr std::size_t kMaxFrame = 16u * 1024u * 1024u;

    void feed(const char* data, std::size_t size);
    std::optional<std::string> next();

  private:
    std::string buffer_;
};

struct TcpBusConfig {
    std::string listen_host{"127.0.0.1"};
    std::uint16_t listen_port{0};  // 0 picks an ephemeral port
    std::map<AgentId, std::string> peers;  // remote agent -> "host:port"
};

/// TCP transport for distributed deployment. Wire bytes are the same
/// canonical envelopes the simulated bus traces, so captures replay across
/// modes. The logical clock is a Lamport counter (1 tick per local event,
/// merged on receive); advance() is a ModeError. All handlers run on the
/// thread that calls poll(), keeping agents sequential.
class TcpBus final : public Bus {
  public:
    explicit TcpBus(TcpBusConfig config);
    ~TcpBus() override;

    TcpBus(const TcpBus&) = delete;
    TcpBus& operator=(const TcpBus&) = delete;

    void start();  // bind, listen, spawn the accept loop
    void stop();
    std::uint16_t port() const { return port_; }

    void register_agent(Agent& agent) override;
    void unregister_agent(const AgentId& agent) override;
    void send(const Envelope& envelope) override;
    Tick now() const override { return lamport_.load(); }
    std::string next_message_id(const AgentId& sender) override;
    void schedule_timer(const AgentId& agent, const std::string& timer_id, Tick delay) override;
    void advance(Tick ticks) override;

    /// Dispatches every queued inbound envelope and due timer on the calling
    /// thread; returns the number of handler invocations.
    std::size_t poll();

    /// Polls until the inbox stays empty for `idle_ms` or `timeout_ms` runs
    /// out; returns total handler invocations.
    std::size_t poll_until_idle(int idle_ms, int timeout_ms);

  private:
    struct PendingTimer {
        std::chrono::steady_clock::time_point due;
        AgentId agent;
        std::string timer_id;
    };

    void accept_loop();
    void reader_loop(int fd);
    int peer_socket(const AgentId& recipient, const std::string& address);
    void enqueue(std::string payload);

    TcpBusConfig config_;
    std::atomic<Tick> lamport_{0};
    std::atomic<bool> running_{false};
    int listen_fd_{-1};
    std::uint16_t port_{0};
    std::thread accept_thread_;
    std::vector<std::thread> readers_;
    std::mutex readers_mutex_;
    std::vector<int> reader_fds_;

    std::mutex inbox_mutex_;
    std::deque<std::string> inbox_;

    std::mutex peers_mutex_;
    std::map<AgentId, int> peer_fds_;

    std::mutex timers_mutex_;
    std::vector<PendingTimer> timers_;

    std::map<AgentId, Agent*> agents_;  // touched only by the poll thread
    std::map<AgentId, std::uint64_t> id_counters_;
    std::map<AgentId, std::set<std::string>> seen_;
};

}  // namespace triad
