#include "triad/repository.hpp"

#include <algorithm>
#include <sstream>

namespace triad {

namespace {

std::vector<Value> inputs_for(const OperationSpec& op) {
    if (!op.example_inputs.empty()) return op.example_inputs;
    return {Value::object()};
}

std::string case_id(std::string_view prefix, const std::string& op, std::size_t k) {
    std::ostringstream out;
    out << prefix << '-' << op << '-' << k;
    return out.str();
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

SuiteStore SuiteStore::from_model(const SutModel& model) {
    SuiteStore store;

    for (const OperationSpec& op : model.operations) {
        for (const Value& input : inputs_for(op)) {
            ExpectedOutput expected{op.name, input, declared_output(model, op, input)};
            store.expected_[{op.name, input.dump()}] = std::move(expected);
        }
    }

    auto build = [&](TestingType type, std::string_view prefix, auto&& keep) {
        TestSuite suite;
        suite.id = std::string(to_string(type)) + "-initial";
        suite.testing_type = type;
        for (const OperationSpec& op : model.operations) {
            if (!keep(op)) continue;
            std::size_t k = 0;
            for (const Value& input : inputs_for(op)) {
                TestCase test_case;
                test_case.id = case_id(prefix, op.name, k++);
                test_case.operation_name = op.name;
                test_case.input = input;
                test_case.expected_output = store.expected_.at({op.name, input.dump()});
                test_case.origin = CaseOrigin::InitialSuite;
                suite.cases.push_back(std::move(test_case));
            }
        }
        return suite;
    };

    store.initial_suites_[TestingType::Unit] =
        build(TestingType::Unit, "u", [](const OperationSpec&) { return true; });
    store.initial_suites_[TestingType::Integration] =
        build(TestingType::Integration, "i", [&](const OperationSpec& op) {
            return model.has_tier(op, "middleware") && model.has_tier(op, "server");
        });
    store.initial_suites_[TestingType::Regression] =
        build(TestingType::Regression, "r", [](const OperationSpec&) { return true; });

    TestSuite stress;
    stress.id = "stress-initial";
    stress.testing_type = TestingType::Stress;
    if (!model.stress_base.empty()) {
        std::size_t k = 0;
        for (const StressCaseSpec& spec : model.stress_base) {
            const OperationSpec* op = model.find_operation(spec.operation_name);
            TestCase test_case;
            test_case.id = case_id("st", spec.operation_name, k++);
            test_case.operation_name = spec.operation_name;
            test_case.input = spec.input;
            if (op != nullptr)
                test_case.expected_output =
                    ExpectedOutput{op->name, spec.input, declared_output(model, *op, spec.input)};
            test_case.origin = CaseOrigin::InitialSuite;
            stress.cases.push_back(std::move(test_case));
        }
    } else {
        stress = build(TestingType::Stress, "st", [](const OperationSpec&) { return true; });
        stress.id = "stress-initial";
    }
    store.initial_suites_[TestingType::Stress] = std::move(stress);

    return store;
}

SuiteStore::IngestResult SuiteStore::ingest(const DefectReport& report, const SutModel& model) {
    DedupKey key = dedup_key(report);
    if (entries_.count(key)) return IngestResult::Discarded;

    TestCase discovered = report.provoking_case;
    discovered.defect_type = report.defect_type;
    if (!discovered.expected_output) {
        auto hit = expected_.find({discovered.operation_name, discovered.input.dump()});
        if (hit != expected_.end()) {
            discovered.expected_output = hit->second;
        } else if (const OperationSpec* op = model.find_operation(discovered.operation_name)) {
            discovered.expected_output = ExpectedOutput{
                op->name, discovered.input, declared_output(model, *op, discovered.input)};
        }
    }
    entries_.emplace(std::move(key), std::move(discovered));
    stored_reports_.push_back(report);
    return IngestResult::Stored;
}

TestSuite SuiteStore::select_suite(const SuiteRequest& request, const SutModel& model) const {
    const auto& constraints = request.constraints;
    std::vector<std::string> wanted_ops;
    if (auto it = constraints.find("operations"); it != constraints.end())
        wanted_ops = split_csv(it->second);
    const bool middleware_only =
        constraints.count("scope") && constraints.at("scope") == "middleware";

    auto keep = [&](const std::string& op_name) {
        if (!wanted_ops.empty() &&
            std::find(wanted_ops.begin(), wanted_ops.end(), op_name) == wanted_ops.end())
            return false;
        if (middleware_only) {
            const OperationSpec* op = model.find_operation(op_name);
            if (op == nullptr || !model.has_tier(*op, "middleware")) return false;
        }
        return true;
    };

    TestSuite suite;
    suite.testing_type = request.testing_type;
    suite.id = std::string(to_string(request.testing_type)) + "-suite";

    auto base = initial_suites_.find(request.testing_type);

    if (request.testing_type == TestingType::Stress) {
        if (base == initial_suites_.end() || base->second.cases.empty())
            throw NoSuiteConfiguredError("no stress suite configured");
        std::uint64_t volume = 1;
        if (auto it = constraints.find("volume"); it != constraints.end())
            volume = std::max<std::uint64_t>(1, std::stoull(it->second));
        std::uint64_t rep = 0;
        for (std::uint64_t r = 0; r < volume; ++r) {
            for (const TestCase& test_case : base->second.cases) {
                if (!keep(test_case.operation_name)) continue;
                TestCase copy = test_case;
                copy.id = test_case.id + "-v" + std::to_string(rep);
                suite.cases.push_back(std::move(copy));
            }
            ++rep;
        }
        if (suite.cases.empty()) throw NoSuiteConfiguredError("stress constraints match no cases");
        return suite;
    }

    if (base != initial_suites_.end()) {
        for (const TestCase& test_case : base->second.cases) {
            if (keep(test_case.operation_name)) suite.cases.push_back(test_case);
        }
    }
    for (const auto& [key, test_case] : entries_) {
        (void)key;
        if (keep(test_case.operation_name)) suite.cases.push_back(test_case);
    }
    if (suite.cases.empty()) {
        throw NoSuiteConfiguredError("no " + std::string(to_string(request.testing_type)) +
                                     " suite configured");
    }
    return suite;
}

std::vector<std::string> SuiteStore::filter_stale(const SutModel& model) {
    std::vector<std::string> removed;
    for (auto it = entries_.begin(); it != entries_.end();) {
        if (model.find_operation(it->second.operation_name) == nullptr) {
            removed.push_back(it->second.id);
            const DedupKey& key = it->first;
            std::erase_if(stored_reports_,
                          [&](const DefectReport& r) { return dedup_key(r) == key; });
            it = entries_.erase(it);
        } else {
            ++it;
        }
    }
    std::sort(removed.begin(), removed.end());
    return removed;
}

Json SuiteStore::snapshot() const {
    Json j = Json::object();
    Json entries = Json::array();
    for (const auto& [key, test_case] : entries_) {
        Json entry = Json::object();
        entry["defect_type"] = key.first;
        entry["operation_name"] = key.second;
        entry["case"] = to_json(test_case);
        entries.push_back(std::move(entry));
    }
    j["entries"] = std::move(entries);

    Json suites = Json::object();
    for (const auto& [type, suite] : initial_suites_)
        suites[std::string(to_string(type))] = to_json(suite);
    j["initial_suites"] = std::move(suites);

    Json expected = Json::array();
    for (const auto& [key, value] : expected_) {
        Json entry = Json::object();
        entry["operation_name"] = key.first;
        entry["input_bytes"] = key.second;
        entry["expected"] = to_json(value);
        expected.push_back(std::move(entry));
    }
    j["expected_outputs"] = std::move(expected);

    Json reports = Json::array();
    for (const DefectReport& report : stored_reports_) reports.push_back(to_json(report));
    j["stored_reports"] = std::move(reports);
    return j;
}

SuiteStore SuiteStore::from_snapshot(const Json& j) {
    SuiteStore store;
    for (const Json& entry : j.at("entries")) {
        DedupKey key{entry.at("defect_type").get<std::string>(),
                     entry.at("operation_name").get<std::string>()};
        store.entries_.emplace(std::move(key), test_case_from_json(entry.at("case")));
    }
    for (const auto& [name, suite] : j.at("initial_suites").items())
        store.initial_suites_[testing_type_from_string(name)] = test_suite_from_json(suite);
    for (const Json& entry : j.at("expected_outputs")) {
        std::pair<std::string, std::string> key{entry.at("operation_name").get<std::string>(),
                                                entry.at("input_bytes").get<std::string>()};
        store.expected_[std::move(key)] = expected_output_from_json(entry.at("expected"));
    }
    for (const Json& report : j.at("stored_reports"))
        store.stored_reports_.push_back(defect_report_from_json(report));
    return store;
}

RepositoryAgent::RepositoryAgent(const SutModel& model, AgentId tester)
    : model_(model), tester_(std::move(tester)), store_(SuiteStore::from_model(model)) {}

void RepositoryAgent::reply(Bus& bus, const Envelope& request, MessageBody body) {
    Envelope out;
    out.header.message_id = bus.next_message_id(id());
    out.header.sender = id();
    out.header.recipient = request.header.sender;
    out.header.correlation_id = request.header.message_id;
    out.header.timestamp = bus.now();
    out.body = std::move(body);
    bus.send(out);
}

void RepositoryAgent::on_envelope(Bus& bus, const Envelope& envelope) {
    if (const auto* forward = std::get_if<TestCaseForward>(&envelope.body)) {
        SuiteStore::IngestResult result = store_.ingest(forward->report, model_);

        FinalReport summary;
        summary.run_id = "dra-summary-" + std::to_string(++summary_count_);
        summary.report_kind = ReportKind::RepositorySummary;
        summary.defects = store_.stored_reports();
        summary.started = bus.now();
        summary.finished = bus.now();
        summary.status =
            result == SuiteStore::IngestResult::Stored ? "stored" : "discarded_duplicate";
        Envelope out;
        out.header.message_id = bus.next_message_id(id());
        out.header.sender = id();
        out.header.recipient = tester_;
        out.header.correlation_id = envelope.header.message_id;
        out.header.timestamp = bus.now();
        out.body = AggregateReport{std::move(summary)};
        bus.send(out);
        return;
    }
    if (const auto* request = std::get_if<SuiteRequest>(&envelope.body)) {
        SuiteResponse response;
        try {
            response.suite = store_.select_suite(*request, model_);
        } catch (const NoSuiteConfiguredError& e) {
            response.error = e.what();
        }
        reply(bus, envelope, std::move(response));
        return;
    }
    if (std::get_if<StatusQuery>(&envelope.body) != nullptr) {
        reply(bus, envelope, StatusReply{false});
        return;
    }
}

}  // namespace triad
