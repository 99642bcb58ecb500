#include "triad/execution.hpp"

#include <algorithm>
#include <charconv>

namespace triad {

namespace {

Tick constraint_ticks(const std::map<std::string, std::string>& constraints,
                      const std::string& key, Tick fallback) {
    auto it = constraints.find(key);
    if (it == constraints.end()) return fallback;
    Tick value = 0;
    const char* first = it->second.data();
    const char* last = first + it->second.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || value <= 0) return fallback;
    return value;
}

std::string mismatch_tier(const SutModel& model, const std::string& operation_name) {
    const OperationSpec* op = model.find_operation(operation_name);
    if (op == nullptr || op->tiers.empty()) return "unknown";
    if (std::find(op->tiers.begin(), op->tiers.end(), "server") != op->tiers.end())
        return "server";
    return op->tiers.back();
}

}  // namespace

ExecMode exec_mode_for(TestingType type) {
    return type == TestingType::Unit ? ExecMode::ClientUnit : ExecMode::Full;
}

ExecutedCase execute_case(SutSimulator& sut, const std::string& client_id,
                          const TestCase& test_case, ExecMode mode, const AgentId& executor,
                          Tick now) {
    ExecutedCase out;
    out.result.case_id = test_case.id;

    if (!client_id.empty()) {
        const ClientSpec* client = sut.model().find_client(client_id);
        if (client != nullptr && !client->allows(test_case.operation_name)) {
            out.result.verdict = Verdict::Error;
            out.result.note = "misrouted: operation '" + test_case.operation_name +
                              "' is not exposed by client '" + client_id + "'";
            return out;
        }
    }

    InvokeOutcome outcome;
    try {
        outcome = sut.invoke(client_id, test_case.operation_name, test_case.input, mode);
    } catch (const Error& e) {
        out.result.verdict = Verdict::Error;
        out.result.note = e.what();
        return out;
    }

    for (auto& [component, walk] : outcome.traces) out.traces[component].push_back(walk);
    out.cost = outcome.cost;

    if (outcome.error) {
        DefectReport defect;
        defect.operation_name = test_case.operation_name;
        defect.defect_type = outcome.error->defect_type;
        defect.provoking_case = test_case;
        defect.provoking_case.defect_type = outcome.error->defect_type;
        defect.discovered_by = executor;
        defect.context = outcome.error->context;
        defect.context["tier"] = outcome.error->tier;
        defect.timestamp = now;
        out.result.verdict = Verdict::Fail;
        out.result.defect = std::move(defect);
        return out;
    }

    out.result.observed_output = outcome.output;
    if (test_case.expected_output && test_case.expected_output->value != *outcome.output) {
        DefectReport defect;
        defect.operation_name = test_case.operation_name;
        defect.defect_type = "unexpected_output";
        defect.provoking_case = test_case;
        defect.provoking_case.defect_type = "unexpected_output";
        defect.discovered_by = executor;
        defect.context["tier"] = mismatch_tier(sut.model(), test_case.operation_name);
        defect.context["expected"] = test_case.expected_output->value.dump();
        defect.context["observed"] = outcome.output->dump();
        defect.timestamp = now;
        out.result.verdict = Verdict::Fail;
        out.result.defect = std::move(defect);
        return out;
    }

    out.result.verdict = Verdict::Pass;
    return out;
}

SuiteRun make_suite_run(TestRequest request, AgentId reply_to, std::string correlation_id,
                        ExecMode mode, std::string client_id, Tick now) {
    SuiteRun run;
    run.deadline = now + constraint_ticks(request.constraints, "deadline", kDefaultRunDeadline);
    auto criterion = request.constraints.find("criterion");
    if (criterion != request.constraints.end())
        run.criterion = coverage_criterion_from_string(criterion->second);
    run.want_coverage = request.testing_type == TestingType::Unit;
    run.request = std::move(request);
    run.reply_to = std::move(reply_to);
    run.correlation_id = std::move(correlation_id);
    run.mode = mode;
    run.client_id = std::move(client_id);
    return run;
}

bool run_finished(const SuiteRun& run, Tick now) {
    return run.next_case >= run.request.suite.cases.size() || now >= run.deadline;
}

Tick run_one_case(SuiteRun& run, SutSimulator& sut, Bus& bus, const AgentId& self,
                  const AgentId& notice_to) {
    const TestCase& test_case = run.request.suite.cases.at(run.next_case);
    ++run.next_case;
    ExecutedCase executed = execute_case(sut, run.client_id, test_case, run.mode, self, bus.now());
    for (auto& [component, walks] : executed.traces) {
        auto& bucket = run.traces[component];
        bucket.insert(bucket.end(), walks.begin(), walks.end());
    }
    if (executed.result.defect) {
        DedupKey key = dedup_key(*executed.result.defect);
        if (run.noticed.insert(key).second) {
            Envelope notice;
            notice.header.message_id = bus.next_message_id(self);
            notice.header.sender = self;
            notice.header.recipient = notice_to;
            notice.header.timestamp = bus.now();
            notice.body = DefectNotice{*executed.result.defect};
            bus.send(notice);
        }
    }
    run.results.push_back(std::move(executed.result));
    return executed.cost;
}

ResultReport finish_run(SuiteRun& run, const SutModel& model, Tick now) {
    ResultReport report;
    report.partial = run.partial || run.next_case < run.request.suite.cases.size();
    report.results = std::move(run.results);
    if (run.want_coverage) {
        std::vector<CoverageSummary> parts;
        for (const auto& [component, walks] : run.traces) {
            auto graph = model.components.find(component);
            if (graph == model.components.end()) continue;
            if (run.mode == ExecMode::MiddlewareUnit) {
                parts.push_back(
                    dataflow_coverage(graph->second, walks, CoverageCriterion::AllUses));
            } else {
                parts.push_back(control_flow_coverage(graph->second, walks, run.criterion));
            }
        }
        if (parts.size() == 1) {
            report.coverage = std::move(parts.front());
        } else if (!parts.empty()) {
            std::vector<std::pair<std::string, CoverageSummary>> labelled;
            std::size_t i = 0;
            for (const auto& [component, walks] : run.traces) {
                (void)walks;
                labelled.emplace_back(component, std::move(parts.at(i++)));
            }
            report.coverage = combine_coverage(labelled);
        }
    }
    (void)now;
    return report;
}

}  // namespace triad
