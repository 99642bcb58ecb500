#pragma once

#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "triad/protocol.hpp"

namespace triad {

struct DuplicateAgentError : Error { using Error::Error; };
struct ModeError : Error { using Error::Error; };
struct TransportError : Error { using Error::Error; };

class Bus;

/// A sequential actor: the bus invokes at most one handler at a time per
/// agent, in per-sender FIFO order, with duplicates suppressed by message_id.
class Agent {
  public:
    virtual ~Agent() = default;

    virtual AgentId id() const = 0;
    virtual void on_start(Bus& bus) { (void)bus; }
    virtual void on_envelope(Bus& bus, const Envelope& envelope) = 0;
    virtual void on_timer(Bus& bus, Tick now, const std::string& timer_id) {
        (void)bus, (void)now, (void)timer_id;
    }
    virtual void on_dead_letter(Bus& bus, const Envelope& envelope, const std::string& reason) {
        (void)bus, (void)envelope, (void)reason;
    }
};

class Bus {
  public:
    virtual ~Bus() = default;

    virtual void register_agent(Agent& agent) = 0;  // DuplicateAgentError on reuse
    virtual void unregister_agent(const AgentId& agent) = 0;
    virtual void send(const Envelope& envelope) = 0;
    virtual Tick now() const = 0;

    /// Fresh deployment-unique id, "<sender>:<counter>".
    virtual std::string next_message_id(const AgentId& sender) = 0;

    /// Fires on_timer at least one tick later (a zero delay is clamped to 1).
    virtual void schedule_timer(const AgentId& agent, const std::string& timer_id,
                                Tick delay) = 0;

    /// Advances the logical clock, firing due events. ModeError on transports
    /// whose clock is not externally driven.
    virtual void advance(Tick ticks) = 0;
};

// ---------------------------------------------------------------------------
// Simulated bus

struct DeliveryRecord {
    Tick tick{0};
    Envelope envelope;
    std::uint32_t attempt{1};  // >1 when the first attempt was dropped

    bool operator==(const DeliveryRecord&) const = default;
};

struct DeadLetter {
    Tick tick{0};
    Envelope envelope;
    std::string reason;
};

struct SimBusConfig {
    std::uint64_t seed{1};
    Tick max_ticks{100000};
    std::uint64_t drop_every{0};       // drop the first attempt of every nth send
    std::uint64_t duplicate_every{0};  // deliver every nth send twice
    Tick retry_delay{3};
};

/// Deterministic discrete-event transport: seeded latency jitter, per-pair
/// FIFO, at-least-once delivery with receiver-side message_id dedup, injected
/// drops (retried) and duplicates (suppressed), plus timers and scheduled
/// actions for scenario scripting. The full event trace is a pure function
/// of seed and script.
class SimBus final : public Bus {
  public:
    explicit SimBus(SimBusConfig config = {});

    void register_agent(Agent& agent) override;
    void unregister_agent(const AgentId& agent) override;
    void send(const Envelope& envelope) override;
    Tick now() const override { return now_; }
    std::string next_message_id(const AgentId& sender) override;
    void schedule_timer(const AgentId& agent, const std::string& timer_id, Tick delay) override;
    void advance(Tick ticks) override;

    /// Runs a callback at now + delay (scenario steps).
    void schedule_action(Tick delay, std::function<void()> action);

    /// Fires events until none are pending or max_ticks is reached; returns
    /// the final tick.
    Tick run_until_quiescent();

    bool quiescent() const { return events_.empty(); }

    const std::vector<DeliveryRecord>& trace() const { return trace_; }
    const std::vector<DeadLetter>& dead_letters() const { return dead_letters_; }
    std::uint64_t deliveries() const { return deliveries_; }
    std::uint64_t suppressed_duplicates() const { return suppressed_duplicates_; }
    std::uint64_t injected_drops() const { return injected_drops_; }

  private:
    struct Event {
        enum class Kind { Deliver, Timer, Action };
        Kind kind{Kind::Deliver};
        Envelope envelope;
        std::uint32_t attempt{1};
        AgentId agent;
        std::string timer_id;
        std::function<void()> action;
    };

    void dispatch(Event& event);
    void push_event(Tick due, Event event);

    SimBusConfig config_;
    std::mt19937_64 rng_;
    Tick now_{0};
    std::uint64_t seq_{0};
    std::uint64_t send_count_{0};
    std::map<std::pair<Tick, std::uint64_t>, Event> events_;
    std::map<AgentId, Agent*> agents_;
    std::map<AgentId, std::uint64_t> id_counters_;
    std::map<std::pair<AgentId, AgentId>, Tick> pair_last_due_;
    std::map<AgentId, std::set<std::string>> seen_;
    std::vector<DeliveryRecord> trace_;
    std::vector<DeadLetter> dead_letters_;
    std::uint64_t deliveries_{0};
    std::uint64_t suppressed_duplicates_{0};
    std::uint64_t injected_drops_{0};
};

}  // namespace triad
