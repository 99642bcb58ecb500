#include "triad/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace triad {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) throw ScenarioError("cannot open '" + path + "'");
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out.is_open()) throw ScenarioError("cannot write '" + path.string() + "'");
    out << bytes;
}

std::string fmt_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.9g", value);
    return buffer;
}

UserSessionScript session_from_json(const Json& j, Tick shift) {
    UserSessionScript script;
    script.session = j.value("name", std::string("session"));
    script.seed = j.value("seed", std::uint64_t{0});
    if (!j.contains("actions") || !j.at("actions").is_array())
        throw ScenarioError("session: 'actions' array required");
    for (const Json& a : j.at("actions")) {
        UserSessionScript::Action action;
        action.operation_name = a.at("op").get<std::string>();
        if (a.contains("input")) action.input = a.at("input");
        action.tick = shift + a.value("at", Tick{0});
        script.actions.push_back(std::move(action));
    }
    script.validate();
    return script;
}

const std::array<std::string_view, 9> kActions = {
    "start_agents",   "set_fault",  "run_user_session", "run_unit",      "run_integration",
    "request_regression", "run_stress", "snapshot",         "assert_report"};

std::vector<std::pair<std::string, AgentId>> make_registry(const SutModel& model) {
    std::vector<std::pair<std::string, AgentId>> registry;
    for (std::size_t i = 0; i < model.clients.size(); ++i)
        registry.emplace_back(model.clients[i].id, AgentId::cca(static_cast<int>(i) + 1));
    return registry;
}

}  // namespace

ScenarioScript ScenarioScript::from_json(const Json& j) {
    ScenarioScript script;
    script.name = j.at("name").get<std::string>();
    script.model_path = j.at("model").get<std::string>();
    script.seed = j.value("seed", std::uint64_t{1});
    script.mua_capacity = j.value("mua_capacity", -1);
    if (!j.contains("steps") || !j.at("steps").is_array())
        throw ScenarioError("scenario '" + script.name + "': 'steps' array required");
    Tick last = 0;
    for (const Json& s : j.at("steps")) {
        ScenarioStep step;
        step.tick = s.at("tick").get<Tick>();
        step.action = s.at("action").get<std::string>();
        if (std::find(kActions.begin(), kActions.end(), step.action) == kActions.end())
            throw ScenarioError("scenario '" + script.name + "': unknown action '" +
                                step.action + "'");
        step.args = s;
        if (step.tick < last)
            throw ScenarioError("scenario '" + script.name + "': steps out of order");
        last = step.tick;
        script.steps.push_back(std::move(step));
    }
    return script;
}

ScenarioScript ScenarioScript::load(const std::string& path) {
    Json j = Json::parse(read_file(path));
    ScenarioScript script = from_json(j);
    fs::path model(script.model_path);
    if (model.is_relative()) script.model_path = (fs::path(path).parent_path() / model).string();
    return script;
}

void TesterInbox::on_envelope(Bus& bus, const Envelope& envelope) {
    received_.emplace_back(bus.now(), envelope);
}

std::vector<std::pair<Tick, FinalReport>> TesterInbox::reports() const {
    std::vector<std::pair<Tick, FinalReport>> out;
    for (const auto& [tick, envelope] : received_) {
        if (const auto* aggregate = std::get_if<AggregateReport>(&envelope.body))
            out.emplace_back(tick, aggregate->report);
    }
    return out;
}

ScenarioRunner::ScenarioRunner(ScenarioScript script, SutModel model, std::string out_dir)
    : script_(std::move(script)),
      model_(std::move(model)),
      out_dir_(std::move(out_dir)),
      sut_(model_),
      bus_(SimBusConfig{script_.seed, 200000, 0, 0, 3}),
      tester_(),
      dra_(model_, AgentId::tester()),
      pool_(sut_, script_.mua_capacity >= 0 ? script_.mua_capacity
                                            : static_cast<int>(model_.clients.size())),
      mca_(sut_, AgentId::dra(), AgentId::tester(), pool_, make_registry(model_)) {
    for (std::size_t i = 0; i < model_.clients.size(); ++i) {
        const std::string& client_id = model_.clients[i].id;
        ccas_.push_back(std::make_unique<ClientAgent>(static_cast<int>(i) + 1, client_id, sut_,
                                                      log_path(client_id), AgentId::mca()));
    }

    fs::remove_all(out_dir_);
    fs::create_directories(fs::path(out_dir_) / "logs");
    fs::create_directories(fs::path(out_dir_) / "reports");
}

std::string ScenarioRunner::log_path(const std::string& client_id) const {
    return (fs::path(out_dir_) / "logs" / (client_id + ".log")).string();
}

ScenarioResult ScenarioRunner::run() {
    bus_.register_agent(tester_);
    bus_.register_agent(dra_);
    bus_.register_agent(mca_);
    for (const auto& cca : ccas_) bus_.register_agent(*cca);

    for (const ScenarioStep& step : script_.steps) {
        bus_.schedule_action(step.tick, [this, step] { execute_step(step); });
    }

    ScenarioResult result;
    result.final_tick = bus_.run_until_quiescent();
    result.failures = failures_;
    result.passed = failures_.empty();
    result.out_dir = out_dir_;
    write_outputs(result);
    return result;
}

void ScenarioRunner::execute_step(const ScenarioStep& step) {
    const Json& args = step.args;
    try {
        if (step.action == "start_agents") return;
        if (step.action == "set_fault") {
            sut_.set_fault(args.at("fault").get<std::string>(), args.value("on", true));
            return;
        }
        if (step.action == "run_user_session") {
            const std::string client = args.at("client").get<std::string>();
            UserSessionScript session;
            if (args.contains("generate")) {
                const Json& gen = args.at("generate");
                session = generate_session(model_,
                                           gen.value("name", "gen-" + client),
                                           gen.value("seed", std::uint64_t{0}),
                                           gen.value("count", 4), bus_.now() + 1);
            } else {
                session = session_from_json(args.at("session"), bus_.now());
            }
            sut_.run_user_session(client, session, log_path(client), true);
            for (const auto& cca : ccas_) {
                if (cca->client_id() == client) bus_.schedule_timer(cca->id(), "monitor", 1);
            }
            return;
        }
        if (step.action == "run_unit") return send_request(TestingType::Unit, args);
        if (step.action == "run_integration")
            return send_request(TestingType::Integration, args);
        if (step.action == "request_regression")
            return send_request(TestingType::Regression, args);
        if (step.action == "run_stress") return send_request(TestingType::Stress, args);
        if (step.action == "snapshot") {
            write_file(fs::path(out_dir_) / args.value("file", std::string("store.json")),
                       dra_.store().snapshot().dump() + "\n");
            return;
        }
        if (step.action == "assert_report") {
            for (std::string& failure : evaluate(args.at("expect"))) {
                failures_.push_back("tick " + std::to_string(bus_.now()) + ": " + failure);
            }
            return;
        }
    } catch (const Error& e) {
        failures_.push_back("tick " + std::to_string(bus_.now()) + ": step '" + step.action +
                            "' failed: " + e.what());
    } catch (const Json::exception& e) {
        failures_.push_back("tick " + std::to_string(bus_.now()) + ": step '" + step.action +
                            "' malformed: " + e.what());
    }
}

void ScenarioRunner::send_request(TestingType type, const Json& args) {
    TestRequest request;
    request.testing_type = type;
    for (const char* key :
         {"scope", "operations", "clients", "criterion", "volume", "intervals", "deadline"}) {
        if (!args.contains(key)) continue;
        const Json& value = args.at(key);
        request.constraints[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
    if (args.contains("suite")) request.suite = test_suite_from_json(args.at("suite"));

    AgentId recipient = AgentId::mca();
    if (args.contains("target")) recipient = AgentId::parse(args.at("target").get<std::string>());

    Envelope envelope;
    envelope.header.message_id = bus_.next_message_id(tester_.id());
    envelope.header.sender = tester_.id();
    envelope.header.recipient = recipient;
    envelope.header.timestamp = bus_.now();
    envelope.body = std::move(request);
    bus_.send(envelope);
}

std::vector<std::string> ScenarioRunner::evaluate(const Json& expect) const {
    std::vector<std::string> failures;
    auto fail = [&failures](const std::string& message) { failures.push_back(message); };

    if (expect.contains("store_size")) {
        const auto want = expect.at("store_size").get<std::size_t>();
        if (store().entries().size() != want) {
            fail("store_size: want " + std::to_string(want) + ", have " +
                 std::to_string(store().entries().size()));
        }
    }

    if (expect.contains("reports_count")) {
        const Json& spec = expect.at("reports_count");
        const ReportKind kind = report_kind_from_string(spec.at("kind").get<std::string>());
        std::size_t count = 0;
        for (const auto& [tick, report] : tester_.reports()) {
            (void)tick;
            if (report.report_kind == kind) ++count;
        }
        const auto want = spec.at("count").get<std::size_t>();
        if (count != want) {
            fail("reports_count[" + std::string(to_string(kind)) + "]: want " +
                 std::to_string(want) + ", have " + std::to_string(count));
        }
    }

    if (expect.contains("report")) {
        const Json& spec = expect.at("report");
        std::vector<FinalReport> matches;
        for (const auto& [tick, report] : tester_.reports()) {
            (void)tick;
            if (spec.contains("kind") &&
                report.report_kind != report_kind_from_string(spec.at("kind").get<std::string>()))
                continue;
            if (spec.contains("testing_type") &&
                (!report.testing_type ||
                 *report.testing_type !=
                     testing_type_from_string(spec.at("testing_type").get<std::string>())))
                continue;
            matches.push_back(report);
        }
        if (matches.empty()) {
            fail("report: no tester report matches the selector");
            return failures;
        }
        std::size_t ordinal = matches.size() - 1;
        if (spec.contains("ordinal")) ordinal = spec.at("ordinal").get<std::size_t>();
        if (ordinal >= matches.size()) {
            fail("report: ordinal out of range");
            return failures;
        }
        const FinalReport& report = matches[ordinal];

        if (spec.contains("status") && report.status != spec.at("status").get<std::string>())
            fail("report.status: want " + spec.at("status").get<std::string>() + ", have " +
                 report.status);
        if (spec.contains("partial") && report.partial != spec.at("partial").get<bool>())
            fail("report.partial: want " + std::string(spec.at("partial").get<bool>() ? "true" : "false"));
        if (spec.contains("defect_count") &&
            report.defects.size() != spec.at("defect_count").get<std::size_t>())
            fail("report.defect_count: want " + spec.at("defect_count").dump() + ", have " +
                 std::to_string(report.defects.size()));
        if (spec.contains("defects_include")) {
            for (const Json& want : spec.at("defects_include")) {
                const std::string type = want.at("defect_type").get<std::string>();
                const std::string op = want.at("operation_name").get<std::string>();
                const auto hit =
                    std::find_if(report.defects.begin(), report.defects.end(),
                                 [&](const DefectReport& d) {
                                     if (d.defect_type != type || d.operation_name != op)
                                         return false;
                                     if (want.contains("tier")) {
                                         auto tier = d.context.find("tier");
                                         if (tier == d.context.end() ||
                                             tier->second != want.at("tier").get<std::string>())
                                             return false;
                                     }
                                     return true;
                                 });
                if (hit == report.defects.end())
                    fail("report.defects_include: missing " + type + " @ " + op);
            }
        }
        if (spec.contains("muas_dispatched") &&
            report.dispatched_muas.size() != spec.at("muas_dispatched").get<std::size_t>())
            fail("report.muas_dispatched: want " + spec.at("muas_dispatched").dump() + ", have " +
                 std::to_string(report.dispatched_muas.size()));
        if (spec.contains("executors") &&
            report.per_agent_results.size() != spec.at("executors").get<std::size_t>())
            fail("report.executors: want " + spec.at("executors").dump() + ", have " +
                 std::to_string(report.per_agent_results.size()));
        if (spec.contains("results_total") || spec.contains("unique_case_ids")) {
            std::size_t total = 0;
            std::set<std::string> ids;
            for (const auto& [agent, results] : report.per_agent_results) {
                (void)agent;
                total += results.size();
                for (const TestResult& result : results) ids.insert(result.case_id);
            }
            if (spec.contains("results_total") &&
                total != spec.at("results_total").get<std::size_t>())
                fail("report.results_total: want " + spec.at("results_total").dump() + ", have " +
                     std::to_string(total));
            if (spec.contains("unique_case_ids") &&
                ids.size() != spec.at("unique_case_ids").get<std::size_t>())
                fail("report.unique_case_ids: want " + spec.at("unique_case_ids").dump() +
                     ", have " + std::to_string(ids.size()));
        }
        if (spec.contains("coverage_ratio_min")) {
            if (!report.coverage) {
                fail("report.coverage: absent");
            } else if (report.coverage->ratio < spec.at("coverage_ratio_min").get<double>()) {
                fail("report.coverage.ratio: want >= " + spec.at("coverage_ratio_min").dump() +
                     ", have " + fmt_double(report.coverage->ratio));
            }
        }
        if (spec.contains("coverage_criterion")) {
            if (!report.coverage ||
                to_string(report.coverage->criterion) !=
                    spec.at("coverage_criterion").get<std::string>())
                fail("report.coverage.criterion mismatch");
        }
        const double tol = spec.value("tol", 1e-9);
        if (spec.contains("reliability_lambda")) {
            if (!report.reliability) {
                fail("report.reliability: absent");
            } else if (std::abs(report.reliability->failure_intensity -
                                spec.at("reliability_lambda").get<double>()) > tol) {
                fail("report.reliability.lambda: want " +
                     spec.at("reliability_lambda").dump() + ", have " +
                     fmt_double(report.reliability->failure_intensity));
            }
        }
        if (spec.contains("reliability_r")) {
            if (!report.reliability) {
                fail("report.reliability: absent");
            } else if (std::abs(report.reliability->reliability_one_interval -
                                spec.at("reliability_r").get<double>()) > tol) {
                fail("report.reliability.r: want " + spec.at("reliability_r").dump() +
                     ", have " + fmt_double(report.reliability->reliability_one_interval));
            }
        }
    }

    if (expect.contains("monitor_order")) {
        const Json& spec = expect.at("monitor_order");
        const std::string type = spec.at("defect_type").get<std::string>();
        const std::string op = spec.at("operation_name").get<std::string>();
        auto matches = [&](const DefectReport& d) {
            return d.defect_type == type && d.operation_name == op;
        };

        std::optional<Tick> t_entry, t_notice, t_forward, t_summary;
        if (spec.contains("client")) {
            std::ifstream in(log_path(spec.at("client").get<std::string>()), std::ios::binary);
            std::string line;
            while (in.is_open() && std::getline(in, line)) {
                LogEntry entry = log_entry_from_line(line);
                if (!entry.ok && entry.defect_type == type && entry.operation_name == op) {
                    t_entry = entry.tick;
                    break;
                }
            }
        }
        for (const DeliveryRecord& record : bus_.trace()) {
            if (const auto* notice = std::get_if<DefectNotice>(&record.envelope.body)) {
                if (!t_notice && matches(notice->report)) t_notice = record.tick;
            } else if (const auto* forward = std::get_if<TestCaseForward>(&record.envelope.body)) {
                if (!t_forward && matches(forward->report)) t_forward = record.tick;
            } else if (const auto* aggregate = std::get_if<AggregateReport>(&record.envelope.body)) {
                const FinalReport& report = aggregate->report;
                if (!t_summary && report.report_kind == ReportKind::RepositorySummary &&
                    report.defects.size() == 1 &&
                    std::any_of(report.defects.begin(), report.defects.end(), matches)) {
                    t_summary = record.tick;
                }
            }
        }
        if (spec.contains("client") && !t_entry) fail("monitor_order: no matching log entry");
        if (!t_notice) fail("monitor_order: no DefectNotice observed");
        if (!t_forward) fail("monitor_order: no TestCaseForward observed");
        if (!t_summary) fail("monitor_order: no single-defect RepositorySummary observed");
        if (t_notice && t_forward && t_summary) {
            if (t_entry && *t_entry >= *t_notice)
                fail("monitor_order: log entry not before notice");
            if (!(*t_notice < *t_forward && *t_forward < *t_summary))
                fail("monitor_order: notice/forward/summary out of order");
        }
    }

    return failures;
}

void ScenarioRunner::write_outputs(const ScenarioResult& result) const {
    std::ostringstream trace;
    for (const DeliveryRecord& record : bus_.trace()) {
        Json line = Json::object();
        line["attempt"] = record.attempt;
        line["envelope"] = to_json(record.envelope);
        line["tick"] = record.tick;
        trace << line.dump() << '\n';
    }
    write_file(fs::path(out_dir_) / "trace.jsonl", trace.str());

    std::size_t index = 0;
    for (const auto& [tick, report] : tester_.reports()) {
        Json j = Json::object();
        j["received_tick"] = tick;
        j["report"] = to_json(report);
        char name[64];
        std::snprintf(name, sizeof name, "report-%03zu-%s.json", index++,
                      std::string(to_string(report.report_kind)).c_str());
        write_file(fs::path(out_dir_) / "reports" / name, j.dump() + "\n");
    }

    write_file(fs::path(out_dir_) / "store.json", dra_.store().snapshot().dump() + "\n");

    Json summary = Json::object();
    summary["failures"] = result.failures;
    summary["final_tick"] = result.final_tick;
    summary["name"] = script_.name;
    summary["passed"] = result.passed;
    write_file(fs::path(out_dir_) / "result.json", summary.dump() + "\n");
}

std::string render_report(const FinalReport& report) {
    std::ostringstream out;
    out << "run " << report.run_id << " kind=" << to_string(report.report_kind);
    if (report.testing_type) out << " type=" << to_string(*report.testing_type);
    out << " status=" << report.status << (report.partial ? " partial" : "") << '\n';
    out << "  window " << report.started << ".." << report.finished << ", executors "
        << report.per_agent_results.size();
    if (!report.dispatched_muas.empty()) {
        out << ", muas";
        for (const AgentId& mua : report.dispatched_muas) out << ' ' << mua.str();
    }
    out << '\n';
    std::size_t results_total = 0;
    for (const auto& [agent, results] : report.per_agent_results) {
        (void)agent;
        results_total += results.size();
    }
    out << "  results " << results_total << ", defects " << report.defects.size() << '\n';
    for (const DefectReport& defect : report.defects) {
        out << "    - " << defect.defect_type << " @ " << defect.operation_name;
        auto tier = defect.context.find("tier");
        if (tier != defect.context.end()) out << " (tier " << tier->second << ")";
        out << '\n';
    }
    if (report.coverage) {
        out << "  coverage " << to_string(report.coverage->criterion) << ' '
            << report.coverage->covered << '/' << report.coverage->total << " = "
            << fmt_double(report.coverage->ratio) << '\n';
    }
    if (report.reliability) {
        out << "  reliability intervals=" << report.reliability->intervals
            << " lambda=" << fmt_double(report.reliability->failure_intensity)
            << " R=" << fmt_double(report.reliability->reliability_one_interval) << '\n';
    }
    return out.str();
}

}  // namespace triad
