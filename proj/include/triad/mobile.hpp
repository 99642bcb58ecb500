#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include "triad/bus.hpp"
#include "triad/execution.hpp"
#include "triad/protocol.hpp"
#include "triad/sut_sim.hpp"

namespace triad {

struct PoolExhaustedError : Error { using Error::Error; };

/// Lifecycle of one dispatched mobile agent:
/// Dispatched -> Running -> Reported | Expired.
struct MuaTask {
    enum class State { Dispatched, Running, Reported, Expired };

    std::string task_id;
    std::string target_client;
    TestRequest request;
    Tick dispatched_at{0};
    State state{State::Dispatched};
};

std::string_view to_string(MuaTask::State state);

/// MUA: created on dispatch, runs exactly one task at the target client with
/// the same execution machinery as a CCA, reports to the dispatcher, and
/// unregisters itself. A task whose deadline is 0 expires without executing.
class MobileAgent final : public Agent {
  public:
    MobileAgent(int instance, SutSimulator& sut);

    AgentId id() const override { return AgentId::mua(instance_); }
    void on_envelope(Bus& bus, const Envelope& envelope) override;
    void on_timer(Bus& bus, Tick now, const std::string& timer_id) override;

    const std::optional<MuaTask>& task() const { return task_; }

  private:
    void finish(Bus& bus, Tick now);

    int instance_;
    SutSimulator& sut_;
    std::optional<MuaTask> task_;
    std::optional<SuiteRun> run_;
};

/// Bounded factory for mobile agents. Reservation and launch are split so a
/// caller can plan a whole dispatch wave before sending any task.
class MuaPool {
  public:
    MuaPool(SutSimulator& sut, int capacity);

    int capacity() const { return capacity_; }
    int active_count() const;
    bool has_capacity() const { return active_count() < capacity_; }

    /// Claims a slot and a fresh agent id. Throws PoolExhaustedError at
    /// capacity and UnknownClientError for an undeclared target client.
    AgentId reserve(const std::string& target_client);

    /// Instantiates and registers the reserved agent.
    void launch(Bus& bus, const AgentId& reserved);

    /// reserve + launch + DispatchAgent envelope from `sender`; returns the
    /// new agent's id.
    AgentId dispatch(Bus& bus, const AgentId& sender, const std::string& target_client,
                     const TestRequest& task);

    /// Frees the agent's slot; the object is destroyed on the next reap().
    void mark_done(const AgentId& agent);

    /// Destroys done agents. Callers must not reap from inside a handler of
    /// an agent being reaped; reaping from another agent's handler is safe.
    void reap();

  private:
    SutSimulator& sut_;
    int capacity_;
    int next_instance_{1};
    std::set<AgentId> reserved_;
    std::map<AgentId, std::unique_ptr<MobileAgent>> live_;
    std::set<AgentId> done_;
};

}  // namespace triad
