#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "triad/bus.hpp"
#include "triad/execution.hpp"
#include "triad/mobile.hpp"
#include "triad/parallel.hpp"
#include "triad/protocol.hpp"
#include "triad/sut_sim.hpp"

namespace triad {

/// MCA: turns tester TestRequests into orchestrated runs. Fetches suites
/// from the repository, probes checker availability for regression runs and
/// substitutes mobile agents for busy checkers, partitions suites across
/// executors, relays every DefectNotice to the repository, and aggregates
/// results into a FinalReport for the requester. Middleware unit suites run
/// inside the controller itself under all-uses dataflow coverage.
class ControllerAgent final : public Agent {
  public:
    ControllerAgent(SutSimulator& sut, AgentId dra, AgentId tester, MuaPool& pool,
                    std::vector<std::pair<std::string, AgentId>> client_registry);

    AgentId id() const override { return AgentId::mca(); }
    void on_envelope(Bus& bus, const Envelope& envelope) override;
    void on_timer(Bus& bus, Tick now, const std::string& timer_id) override;

    std::size_t active_runs() const { return runs_.size(); }

  private:
    enum class Phase { AwaitSuite, Probing, Executing, MiddlewareRun };

    struct Run {
        std::string run_id;
        TestingType testing_type{TestingType::Unit};
        Phase phase{Phase::AwaitSuite};
        AgentId requester;
        std::string request_msg_id;
        std::map<std::string, std::string> constraints;
        std::vector<std::string> target_clients;
        Tick started{0};
        Tick deadline{0};
        std::uint32_t intervals{1};
        TestSuite suite;
        std::vector<AgentId> executors;
        std::set<AgentId> pending;
        std::map<AgentId, bool> probe_busy;
        std::set<AgentId> probe_pending;
        std::map<AgentId, std::vector<TestResult>> per_agent;
        std::map<AgentId, CoverageSummary> coverage_parts;
        std::vector<AgentId> dispatched_muas;
        bool partial{false};
        std::string status{"ok"};
        std::optional<SuiteRun> self_run;
    };

    void start_run(Bus& bus, const Envelope& envelope, const TestRequest& request);
    void start_execution(Bus& bus, Run& run);
    void proceed_after_probe(Bus& bus, Run& run);
    void dispatch_streams(Bus& bus, Run& run, const std::vector<AgentId>& executors,
                          const std::vector<std::string>& executor_clients);
    void step_middleware(Bus& bus, Run& run, Tick now);
    void forward_defect(Bus& bus, const DefectReport& report,
                        const std::optional<std::string>& correlation);
    void finalize(Bus& bus, Run& run);
    Run* find_run(const std::string& run_id);
    void send_to(Bus& bus, const AgentId& recipient, MessageBody body,
                 const std::optional<std::string>& correlation, std::string* sent_id = nullptr);

    SutSimulator& sut_;
    AgentId dra_;
    AgentId tester_;
    MuaPool& pool_;
    std::vector<std::pair<std::string, AgentId>> clients_;
    std::map<std::string, Run> runs_;
    std::map<std::string, std::string> suite_corr_;   // suite request id -> run
    std::map<std::string, std::string> probe_corr_;   // status query id -> run
    std::map<std::string, std::pair<std::string, AgentId>> result_corr_;
    std::uint64_t run_count_{0};
    std::uint64_t alert_count_{0};
};

/// Probe window: a checker that has not answered a StatusQuery within this
/// many ticks counts as busy.
inline constexpr Tick kProbeDeadline = 8;

}  // namespace triad
