#pragma once

#include <map>
#include <string>
#include <vector>

#include "triad/core.hpp"
#include "triad/protocol.hpp"
#include "triad/sut_sim.hpp"

namespace triad {

struct NoExecutorsError : Error { using Error::Error; };

struct Stream {
    AgentId executor;
    std::vector<TestCase> cases;

    bool operator==(const Stream&) const = default;
};

struct StreamPlan {
    std::string run_id;
    std::vector<Stream> streams;

    bool operator==(const StreamPlan&) const = default;
};

/// Round-robin split: case i goes to executor i mod k, preserving case order
/// within each stream. The streams concatenate back to a permutation of the
/// suite with every case appearing exactly once. Throws NoExecutorsError when
/// `executors` is empty.
StreamPlan partition(const TestSuite& suite, const std::vector<AgentId>& executors,
                     std::string run_id);

/// Union of Fail-verdict defects across executors, deduplicated by dedup_key.
/// Order: first occurrence, iterating executors by id and results in order.
std::vector<DefectReport> dedup_defects(
    const std::map<AgentId, std::vector<TestResult>>& per_agent);

/// Assembles a run's FinalReport; `defects` is derived via dedup_defects.
FinalReport finalize_report(std::string run_id, TestingType testing_type,
                            std::map<AgentId, std::vector<TestResult>> per_agent,
                            Tick started, Tick finished, bool partial, std::string status,
                            std::vector<AgentId> dispatched_muas);

/// Executes every stream to completion, one case at a time in stream order.
/// Provides the schedule-independence oracle: for suites whose verdicts do not
/// depend on cross-stream interleaving, results match the bus-driven run.
std::map<AgentId, std::vector<TestResult>> execute_plan(SutSimulator& sut,
                                                        const StreamPlan& plan, ExecMode mode,
                                                        Tick now = 0);

}  // namespace triad
