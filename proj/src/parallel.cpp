#include "triad/parallel.hpp"

#include <set>

#include "triad/execution.hpp"

namespace triad {

StreamPlan partition(const TestSuite& suite, const std::vector<AgentId>& executors,
                     std::string run_id) {
    if (executors.empty())
        throw NoExecutorsError("cannot partition suite '" + suite.id + "': no executors");
    StreamPlan plan;
    plan.run_id = std::move(run_id);
    plan.streams.reserve(executors.size());
    for (const AgentId& executor : executors) plan.streams.push_back({executor, {}});
    for (std::size_t i = 0; i < suite.cases.size(); ++i)
        plan.streams[i % executors.size()].cases.push_back(suite.cases[i]);
    return plan;
}

std::vector<DefectReport> dedup_defects(
    const std::map<AgentId, std::vector<TestResult>>& per_agent) {
    std::vector<DefectReport> defects;
    std::set<DedupKey> seen;
    for (const auto& [agent, results] : per_agent) {
        (void)agent;
        for (const TestResult& result : results) {
            if (result.verdict != Verdict::Fail || !result.defect) continue;
            if (seen.insert(dedup_key(*result.defect)).second)
                defects.push_back(*result.defect);
        }
    }
    return defects;
}

FinalReport finalize_report(std::string run_id, TestingType testing_type,
                            std::map<AgentId, std::vector<TestResult>> per_agent, Tick started,
                            Tick finished, bool partial, std::string status,
                            std::vector<AgentId> dispatched_muas) {
    FinalReport report;
    report.run_id = std::move(run_id);
    report.report_kind = ReportKind::Run;
    report.testing_type = testing_type;
    report.defects = dedup_defects(per_agent);
    report.per_agent_results = std::move(per_agent);
    report.started = started;
    report.finished = finished;
    report.partial = partial;
    report.status = std::move(status);
    report.dispatched_muas = std::move(dispatched_muas);
    return report;
}

std::map<AgentId, std::vector<TestResult>> execute_plan(SutSimulator& sut,
                                                        const StreamPlan& plan, ExecMode mode,
                                                        Tick now) {
    std::map<AgentId, std::vector<TestResult>> per_agent;
    for (const Stream& stream : plan.streams) {
        auto& results = per_agent[stream.executor];
        const ClientSpec* client =
            stream.executor.role == AgentRole::Cca && !sut.model().clients.empty()
                ? &sut.model().clients.at(
                      static_cast<std::size_t>(stream.executor.instance - 1) %
                      sut.model().clients.size())
                : nullptr;
        for (const TestCase& test_case : stream.cases) {
            ExecutedCase executed = execute_case(sut, client ? client->id : std::string{},
                                                 test_case, mode, stream.executor, now);
            results.push_back(std::move(executed.result));
        }
    }
    return per_agent;
}

}  // namespace triad
