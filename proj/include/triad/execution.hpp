#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "triad/bus.hpp"
#include "triad/core.hpp"
#include "triad/coverage.hpp"
#include "triad/protocol.hpp"
#include "triad/sut_sim.hpp"

namespace triad {

// Outcome of executing one test case against the simulator.
struct ExecutedCase {
    TestResult result;
    std::map<std::string, std::vector<ExecutionTrace>> traces;  // component -> walks
    Tick cost{1};
};

// Executes a single case. Verdicts:
//   - operation outside the client's declared set -> Error ("misrouted"), no invocation
//   - simulator raises a tier error -> Fail with a DefectReport built from the error
//   - clean run with expected output present -> Pass/Fail by exact value comparison;
//     a silent mismatch is reported as "unexpected_output" attributed to the deepest
//     tier the operation traverses
//   - clean run without an expected output -> Pass
ExecutedCase execute_case(SutSimulator& sut,
                          const std::string& client_id,
                          const TestCase& test_case,
                          ExecMode mode,
                          const AgentId& executor,
                          Tick now);

// State of one in-progress suite execution, advanced one case per timer step.
struct SuiteRun {
    TestRequest request;
    AgentId reply_to;
    std::string correlation_id;
    ExecMode mode{ExecMode::Full};
    std::string client_id;  // empty for middleware-unit runs
    CoverageCriterion criterion{CoverageCriterion::NodeCoverage};
    bool want_coverage{false};
    Tick deadline{0};

    std::size_t next_case{0};
    std::vector<TestResult> results;
    std::map<std::string, std::vector<ExecutionTrace>> traces;
    std::set<DedupKey> noticed;
    bool partial{false};
};

// Builds a run from a request. Relative deadline and coverage criterion come from
// request.constraints ("deadline", "criterion"); defaults are 1000 ticks and
// node coverage.
SuiteRun make_suite_run(TestRequest request,
                        AgentId reply_to,
                        std::string correlation_id,
                        ExecMode mode,
                        std::string client_id,
                        Tick now);

bool run_finished(const SuiteRun& run, Tick now);

// Executes the next case, appends its result, and sends one DefectNotice per
// defect key not yet reported in this run. Returns the case cost in ticks.
Tick run_one_case(SuiteRun& run,
                  SutSimulator& sut,
                  Bus& bus,
                  const AgentId& self,
                  const AgentId& notice_to);

// Assembles the final report for a run. Sets `partial` when the deadline cut
// the run short and computes coverage for unit runs:
// control-flow for client components, all-uses dataflow for middleware.
ResultReport finish_run(SuiteRun& run, const SutModel& model, Tick now);

// Maps a testing type to the execution mode a client-side executor uses.
ExecMode exec_mode_for(TestingType type);

inline constexpr Tick kDefaultRunDeadline = 1000;

}  // namespace triad
