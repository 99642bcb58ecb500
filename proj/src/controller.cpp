#include "triad/controller.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace triad {

namespace {

std::uint64_t constraint_u64(const std::map<std::string, std::string>& constraints,
                             const std::string& key, std::uint64_t fallback) {
    auto it = constraints.find(key);
    if (it == constraints.end()) return fallback;
    std::uint64_t value = 0;
    const char* first = it->second.data();
    const char* last = first + it->second.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || value == 0) return fallback;
    return value;
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

ControllerAgent::ControllerAgent(SutSimulator& sut, AgentId dra, AgentId tester, MuaPool& pool,
                                 std::vector<std::pair<std::string, AgentId>> client_registry)
    : sut_(sut),
      dra_(std::move(dra)),
      tester_(std::move(tester)),
      pool_(pool),
      clients_(std::move(client_registry)) {}

void ControllerAgent::send_to(Bus& bus, const AgentId& recipient, MessageBody body,
                              const std::optional<std::string>& correlation,
                              std::string* sent_id) {
    Envelope out;
    out.header.message_id = bus.next_message_id(id());
    out.header.sender = id();
    out.header.recipient = recipient;
    out.header.correlation_id = correlation;
    out.header.timestamp = bus.now();
    out.body = std::move(body);
    if (sent_id != nullptr) *sent_id = out.header.message_id;
    bus.send(out);
}

ControllerAgent::Run* ControllerAgent::find_run(const std::string& run_id) {
    auto it = runs_.find(run_id);
    return it == runs_.end() ? nullptr : &it->second;
}

void ControllerAgent::on_envelope(Bus& bus, const Envelope& envelope) {
    if (const auto* request = std::get_if<TestRequest>(&envelope.body)) {
        start_run(bus, envelope, *request);
        return;
    }
    if (const auto* response = std::get_if<SuiteResponse>(&envelope.body)) {
        if (!envelope.header.correlation_id) return;
        auto corr = suite_corr_.find(*envelope.header.correlation_id);
        if (corr == suite_corr_.end()) return;
        const std::string run_id = corr->second;
        suite_corr_.erase(corr);
        Run* run = find_run(run_id);
        if (run == nullptr || run->phase != Phase::AwaitSuite) return;
        if (response->error) {
            run->status = "no_suite";
            finalize(bus, *run);
            return;
        }
        run->suite = response->suite;
        start_execution(bus, *run);
        return;
    }
    if (const auto* reply = std::get_if<StatusReply>(&envelope.body)) {
        if (!envelope.header.correlation_id) return;
        auto corr = probe_corr_.find(*envelope.header.correlation_id);
        if (corr == probe_corr_.end()) return;
        const std::string run_id = corr->second;
        probe_corr_.erase(corr);
        Run* run = find_run(run_id);
        if (run == nullptr || run->phase != Phase::Probing) return;
        run->probe_busy[envelope.header.sender] = reply->busy;
        run->probe_pending.erase(envelope.header.sender);
        if (run->probe_pending.empty()) proceed_after_probe(bus, *run);
        return;
    }
    if (const auto* report = std::get_if<ResultReport>(&envelope.body)) {
        if (envelope.header.sender.role == AgentRole::Mua) {
            pool_.mark_done(envelope.header.sender);
            pool_.reap();
        }
        if (!envelope.header.correlation_id) return;
        auto corr = result_corr_.find(*envelope.header.correlation_id);
        if (corr == result_corr_.end()) return;
        auto [run_id, executor] = corr->second;
        result_corr_.erase(corr);
        Run* run = find_run(run_id);
        if (run == nullptr || run->phase != Phase::Executing) return;
        run->per_agent[executor] = report->results;
        run->partial = run->partial || report->partial;
        if (report->coverage) run->coverage_parts[executor] = *report->coverage;
        run->pending.erase(executor);
        if (run->pending.empty()) finalize(bus, *run);
        return;
    }
    if (const auto* notice = std::get_if<DefectNotice>(&envelope.body)) {
        forward_defect(bus, notice->report, envelope.header.message_id);
        const AgentId& sender = envelope.header.sender;
        const bool from_run =
            std::any_of(runs_.begin(), runs_.end(), [&](const auto& entry) {
                const Run& run = entry.second;
                return std::find(run.executors.begin(), run.executors.end(), sender) !=
                       run.executors.end();
            });
        if (!from_run) {
            FinalReport alert;
            alert.run_id = "monitor-alert-" + std::to_string(++alert_count_);
            alert.report_kind = ReportKind::MonitorAlert;
            alert.defects = {notice->report};
            alert.started = bus.now();
            alert.finished = bus.now();
            alert.status = "alert";
            send_to(bus, tester_, AggregateReport{std::move(alert)},
                    envelope.header.message_id);
        }
        return;
    }
    if (std::get_if<StatusQuery>(&envelope.body) != nullptr) {
        send_to(bus, envelope.header.sender, StatusReply{false}, envelope.header.message_id);
        return;
    }
}

void ControllerAgent::start_run(Bus& bus, const Envelope& envelope, const TestRequest& request) {
    Run run;
    run.run_id = "run-" + std::to_string(++run_count_);
    run.testing_type = request.testing_type;
    run.requester = envelope.header.sender;
    run.request_msg_id = envelope.header.message_id;
    run.constraints = request.constraints;
    run.started = bus.now();
    run.deadline =
        bus.now() + static_cast<Tick>(constraint_u64(request.constraints, "deadline",
                                                     static_cast<std::uint64_t>(kDefaultRunDeadline)));
    run.intervals =
        static_cast<std::uint32_t>(constraint_u64(request.constraints, "intervals", 1));

    if (auto it = request.constraints.find("clients"); it != request.constraints.end()) {
        run.target_clients = split_csv(it->second);
    } else {
        for (const auto& [client_id, cca] : clients_) {
            (void)cca;
            run.target_clients.push_back(client_id);
        }
    }

    const std::string run_id = run.run_id;
    run.suite = request.suite;
    runs_.emplace(run_id, std::move(run));
    Run& stored = runs_.at(run_id);
    bus.schedule_timer(id(), "deadline:" + run_id, stored.deadline - bus.now());

    if (!stored.suite.cases.empty()) {
        start_execution(bus, stored);
        return;
    }
    SuiteRequest suite_request{stored.testing_type, stored.constraints};
    std::string sent_id;
    send_to(bus, dra_, std::move(suite_request), std::nullopt, &sent_id);
    suite_corr_[sent_id] = run_id;
}

void ControllerAgent::start_execution(Bus& bus, Run& run) {
    const bool middleware = run.constraints.count("scope") != 0u &&
                            run.constraints.at("scope") == "middleware";
    if (middleware) {
        run.phase = Phase::MiddlewareRun;
        run.executors = {id()};
        TestRequest request{run.testing_type, run.suite, run.constraints};
        run.self_run = make_suite_run(std::move(request), run.requester, run.request_msg_id,
                                      ExecMode::MiddlewareUnit, "", bus.now());
        bus.schedule_timer(id(), "mstep:" + run.run_id, 1);
        return;
    }

    if (run.testing_type == TestingType::Regression) {
        run.phase = Phase::Probing;
        for (const std::string& client_id : run.target_clients) {
            auto entry = std::find_if(clients_.begin(), clients_.end(),
                                      [&](const auto& e) { return e.first == client_id; });
            if (entry == clients_.end()) continue;
            std::string sent_id;
            send_to(bus, entry->second, StatusQuery{}, std::nullopt, &sent_id);
            probe_corr_[sent_id] = run.run_id;
            run.probe_pending.insert(entry->second);
        }
        if (run.probe_pending.empty()) {
            proceed_after_probe(bus, run);
        } else {
            bus.schedule_timer(id(), "probe:" + run.run_id, kProbeDeadline);
        }
        return;
    }

    std::vector<AgentId> executors;
    std::vector<std::string> executor_clients;
    for (const std::string& client_id : run.target_clients) {
        auto entry = std::find_if(clients_.begin(), clients_.end(),
                                  [&](const auto& e) { return e.first == client_id; });
        if (entry == clients_.end()) continue;
        executors.push_back(entry->second);
        executor_clients.push_back(client_id);
    }
    dispatch_streams(bus, run, executors, executor_clients);
}

void ControllerAgent::proceed_after_probe(Bus& bus, Run& run) {
    std::vector<AgentId> executors;
    std::vector<std::string> executor_clients;
    for (const std::string& client_id : run.target_clients) {
        auto entry = std::find_if(clients_.begin(), clients_.end(),
                                  [&](const auto& e) { return e.first == client_id; });
        if (entry == clients_.end()) continue;
        auto busy = run.probe_busy.find(entry->second);
        const bool is_busy = busy == run.probe_busy.end() || busy->second;
        if (!is_busy) {
            executors.push_back(entry->second);
            executor_clients.push_back(client_id);
            continue;
        }
        try {
            executors.push_back(pool_.reserve(client_id));
            executor_clients.push_back(client_id);
        } catch (const PoolExhaustedError&) {
            // client stays uncovered; remaining executors absorb its share
        }
    }
    dispatch_streams(bus, run, executors, executor_clients);
}

void ControllerAgent::dispatch_streams(Bus& bus, Run& run,
                                       const std::vector<AgentId>& executors,
                                       const std::vector<std::string>& executor_clients) {
    if (executors.empty()) {
        run.status = "no_capacity";
        finalize(bus, run);
        return;
    }
    run.phase = Phase::Executing;
    run.executors = executors;

    const bool replicate = run.testing_type == TestingType::Unit;
    StreamPlan plan;
    if (!replicate) plan = partition(run.suite, executors, run.run_id);

    for (std::size_t i = 0; i < executors.size(); ++i) {
        TestSuite stream;
        stream.id = run.run_id + "-stream-" + std::to_string(i);
        stream.testing_type = run.testing_type;
        stream.cases = replicate ? run.suite.cases : plan.streams.at(i).cases;
        TestRequest task{run.testing_type, std::move(stream), run.constraints};

        run.pending.insert(executors[i]);
        run.per_agent[executors[i]];
        if (executors[i].role == AgentRole::Mua) {
            pool_.launch(bus, executors[i]);
            std::string sent_id;
            send_to(bus, executors[i], DispatchAgent{executor_clients.at(i), std::move(task)},
                    std::nullopt, &sent_id);
            result_corr_[sent_id] = {run.run_id, executors[i]};
            run.dispatched_muas.push_back(executors[i]);
        } else {
            std::string sent_id;
            send_to(bus, executors[i], std::move(task), std::nullopt, &sent_id);
            result_corr_[sent_id] = {run.run_id, executors[i]};
        }
    }
}

void ControllerAgent::on_timer(Bus& bus, Tick now, const std::string& timer_id) {
    auto colon = timer_id.find(':');
    if (colon == std::string::npos) return;
    const std::string kind = timer_id.substr(0, colon);
    const std::string run_id = timer_id.substr(colon + 1);
    Run* run = find_run(run_id);
    if (run == nullptr) return;

    if (kind == "probe") {
        if (run->phase != Phase::Probing) return;
        for (const AgentId& cca : run->probe_pending) run->probe_busy[cca] = true;
        run->probe_pending.clear();
        proceed_after_probe(bus, *run);
        return;
    }
    if (kind == "mstep") {
        step_middleware(bus, *run, now);
        return;
    }
    if (kind == "deadline") {
        if (run->phase == Phase::MiddlewareRun) {
            if (run->self_run) run->self_run->partial = true;
            step_middleware(bus, *run, now);
            return;
        }
        run->partial = true;
        finalize(bus, *run);
        return;
    }
}

void ControllerAgent::step_middleware(Bus& bus, Run& run, Tick now) {
    if (!run.self_run) return;
    if (run_finished(*run.self_run, now) || run.self_run->partial) {
        ResultReport report = finish_run(*run.self_run, sut_.model(), now);
        run.per_agent[id()] = report.results;
        run.partial = run.partial || report.partial;
        if (report.coverage) run.coverage_parts[id()] = *report.coverage;
        run.self_run.reset();
        finalize(bus, run);
        return;
    }
    Tick cost = run_one_case(*run.self_run, sut_, bus, id(), id());
    bus.schedule_timer(id(), "mstep:" + run.run_id, cost);
}

void ControllerAgent::forward_defect(Bus& bus, const DefectReport& report,
                                     const std::optional<std::string>& correlation) {
    send_to(bus, dra_, TestCaseForward{report}, correlation);
}

void ControllerAgent::finalize(Bus& bus, Run& run) {
    if (!run.pending.empty()) run.partial = true;

    FinalReport report =
        finalize_report(run.run_id, run.testing_type, run.per_agent, run.started, bus.now(),
                        run.partial, run.status, run.dispatched_muas);

    if (!run.coverage_parts.empty()) {
        if (run.coverage_parts.size() == 1) {
            report.coverage = run.coverage_parts.begin()->second;
        } else {
            std::vector<std::pair<std::string, CoverageSummary>> parts;
            for (const auto& [agent, summary] : run.coverage_parts)
                parts.emplace_back(agent.str(), summary);
            report.coverage = combine_coverage(parts);
        }
    }

    if (run.testing_type == TestingType::Stress && bus.now() > run.started) {
        std::vector<Tick> fail_ticks;
        for (const auto& [agent, results] : run.per_agent) {
            (void)agent;
            for (const TestResult& result : results) {
                if (result.verdict == Verdict::Fail && result.defect)
                    fail_ticks.push_back(result.defect->timestamp);
            }
        }
        report.reliability = estimate(fail_ticks, run.started, bus.now(), run.intervals);
    }

    send_to(bus, run.requester, AggregateReport{std::move(report)}, run.request_msg_id);
    const std::string run_id = run.run_id;
    runs_.erase(run_id);
    pool_.reap();
}

}  // namespace triad
