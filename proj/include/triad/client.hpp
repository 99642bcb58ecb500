#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "triad/bus.hpp"
#include "triad/execution.hpp"
#include "triad/protocol.hpp"
#include "triad/sut_sim.hpp"
#include "triad/user_log.hpp"

namespace triad {

/// Cursor into a client's user log plus the session's dedup memory.
struct MonitorState {
    std::uint64_t byte_offset{0};
    std::uint64_t entry_index{0};
    std::set<DedupKey> reported;
};

struct ScanOutcome {
    std::vector<DefectReport> reports;      // fresh defects, in log order
    std::optional<std::string> corruption;  // set when the scan stopped early
    std::uint64_t scanned{0};               // entries consumed by this scan
};

/// Incremental scan from the recorded cursor. Error entries with a fresh
/// dedup key become reports; every parsed entry advances the cursor. On a
/// corrupt line the scan stops with the cursor still at that line, so
/// scanning in one pass or in arbitrary increments yields the same reports.
/// A missing file is an empty scan.
ScanOutcome scan_log(MonitorState& state, const std::string& log_path,
                     const AgentId& discoverer);

/// CCA: executes client-side suites one request at a time and, when idle,
/// monitors its client's user log for defects surfaced by real sessions.
/// Monitoring is woken by a "monitor" timer (scheduled externally after log
/// activity, and by the agent itself when a run completes).
class ClientAgent final : public Agent {
  public:
    ClientAgent(int instance, std::string client_id, SutSimulator& sut, std::string log_path,
                AgentId mca);

    AgentId id() const override { return AgentId::cca(instance_); }
    void on_envelope(Bus& bus, const Envelope& envelope) override;
    void on_timer(Bus& bus, Tick now, const std::string& timer_id) override;

    bool busy() const { return run_.has_value() || !queue_.empty(); }
    const MonitorState& monitor_state() const { return monitor_; }
    const std::string& client_id() const { return client_id_; }

  private:
    void begin_next(Bus& bus);
    void do_scan(Bus& bus);

    int instance_;
    std::string client_id_;
    SutSimulator& sut_;
    std::string log_path_;
    AgentId mca_;
    std::optional<SuiteRun> run_;
    std::deque<std::pair<TestRequest, MessageHeader>> queue_;
    MonitorState monitor_;
};

}  // namespace triad
