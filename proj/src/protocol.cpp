#include "triad/protocol.hpp"

#include <cmath>

namespace triad {

namespace {

[[noreturn]] void schema_fail(const std::string& context, const std::string& detail) {
    throw SchemaViolationError(context + ": " + detail);
}

const Json& field(const Json& j, const char* key, const char* context) {
    if (!j.is_object()) schema_fail(context, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) schema_fail(context, std::string("missing field '") + key + "'");
    return *it;
}

const Json* optional_field(const Json& j, const char* key, const char* context) {
    if (!j.is_object()) schema_fail(context, "expected an object");
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

std::string get_string(const Json& j, const char* key, const char* context) {
    const Json& v = field(j, key, context);
    if (!v.is_string()) schema_fail(context, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

bool get_bool(const Json& j, const char* key, const char* context) {
    const Json& v = field(j, key, context);
    if (!v.is_boolean()) schema_fail(context, std::string("field '") + key + "' must be a boolean");
    return v.get<bool>();
}

std::uint64_t get_uint(const Json& j, const char* key, const char* context) {
    const Json& v = field(j, key, context);
    if (!v.is_number_unsigned())
        schema_fail(context, std::string("field '") + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

double get_double(const Json& j, const char* key, const char* context) {
    const Json& v = field(j, key, context);
    if (!v.is_number()) schema_fail(context, std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

AgentId get_agent_id(const Json& j, const char* key, const char* context) {
    std::string text = get_string(j, key, context);
    try {
        return AgentId::parse(text);
    } catch (const Error& e) {
        schema_fail(context, std::string("field '") + key + "': " + e.what());
    }
}

AgentId parse_agent_id(const std::string& text, const char* context) {
    try {
        return AgentId::parse(text);
    } catch (const Error& e) {
        schema_fail(context, e.what());
    }
}

template <class Enum>
Enum get_enum(const Json& j, const char* key, const char* context,
              Enum (*from_string)(std::string_view)) {
    std::string text = get_string(j, key, context);
    try {
        return from_string(text);
    } catch (const Error& e) {
        schema_fail(context, std::string("field '") + key + "': " + e.what());
    }
}

std::map<std::string, std::string> get_string_map(const Json& j, const char* key,
                                                  const char* context) {
    const Json& v = field(j, key, context);
    if (!v.is_object())
        schema_fail(context, std::string("field '") + key + "' must be an object");
    std::map<std::string, std::string> out;
    for (const auto& [k, val] : v.items()) {
        if (!val.is_string())
            schema_fail(context, std::string("field '") + key + "' values must be strings");
        out.emplace(k, val.get<std::string>());
    }
    return out;
}

const Json& get_array(const Json& j, const char* key, const char* context) {
    const Json& v = field(j, key, context);
    if (!v.is_array()) schema_fail(context, std::string("field '") + key + "' must be an array");
    return v;
}

Value get_value(const Json& j, const char* key, const char* context) {
    Value v = field(j, key, context);
    require_canonical_value(v, std::string(context) + "." + key);
    return v;
}

}  // namespace

void require_canonical_value(const Value& value, const std::string& where) {
    if (value.is_null())
        throw SchemaViolationError(where + ": null is not a canonical value");
    if (value.is_number_float() && !std::isfinite(value.get<double>()))
        throw SchemaViolationError(where + ": non-finite number is not a canonical value");
    if (value.is_object()) {
        for (const auto& [key, item] : value.items()) require_canonical_value(item, where + "." + key);
    } else if (value.is_array()) {
        for (const auto& item : value) require_canonical_value(item, where + "[]");
    }
}

// ---------------------------------------------------------------------------
// to_json

Json to_json(const ExpectedOutput& expected) {
    require_canonical_value(expected.for_input, "ExpectedOutput.for_input");
    require_canonical_value(expected.value, "ExpectedOutput.value");
    Json j = Json::object();
    j["operation_name"] = expected.operation_name;
    j["for_input"] = expected.for_input;
    j["value"] = expected.value;
    return j;
}

Json to_json(const TestCase& test_case) {
    require_canonical_value(test_case.input, "TestCase.input");
    Json j = Json::object();
    j["id"] = test_case.id;
    j["operation_name"] = test_case.operation_name;
    j["input"] = test_case.input;
    if (test_case.defect_type) j["defect_type"] = *test_case.defect_type;
    if (test_case.expected_output) j["expected_output"] = to_json(*test_case.expected_output);
    j["origin"] = to_string(test_case.origin);
    return j;
}

Json to_json(const TestSuite& suite) {
    Json cases = Json::array();
    for (const auto& c : suite.cases) cases.push_back(to_json(c));
    Json j = Json::object();
    j["id"] = suite.id;
    j["testing_type"] = to_string(suite.testing_type);
    j["cases"] = std::move(cases);
    return j;
}

Json to_json(const DefectReport& report) {
    Json j = Json::object();
    j["operation_name"] = report.operation_name;
    j["defect_type"] = report.defect_type;
    j["provoking_case"] = to_json(report.provoking_case);
    j["discovered_by"] = report.discovered_by.str();
    j["context"] = report.context;
    j["timestamp"] = report.timestamp;
    return j;
}

Json to_json(const TestResult& result) {
    Json j = Json::object();
    j["case_id"] = result.case_id;
    j["verdict"] = to_string(result.verdict);
    if (result.observed_output) {
        require_canonical_value(*result.observed_output, "TestResult.observed_output");
        j["observed_output"] = *result.observed_output;
    }
    if (result.defect) j["defect"] = to_json(*result.defect);
    if (result.note) j["note"] = *result.note;
    return j;
}

Json to_json(const CoverageSummary& summary) {
    Json j = Json::object();
    j["criterion"] = to_string(summary.criterion);
    j["covered"] = summary.covered;
    j["total"] = summary.total;
    j["ratio"] = summary.ratio;
    j["uncovered_items"] = summary.uncovered_items;
    return j;
}

Json to_json(const ReliabilityEstimate& estimate) {
    Json j = Json::object();
    j["intervals"] = estimate.intervals;
    j["defects_per_interval"] = estimate.defects_per_interval;
    j["failure_intensity"] = estimate.failure_intensity;
    j["reliability_one_interval"] = estimate.reliability_one_interval;
    return j;
}

Json to_json(const FinalReport& report) {
    Json per_agent = Json::object();
    for (const auto& [agent, results] : report.per_agent_results) {
        Json list = Json::array();
        for (const auto& r : results) list.push_back(to_json(r));
        per_agent[agent.str()] = std::move(list);
    }
    Json defects = Json::array();
    for (const auto& d : report.defects) defects.push_back(to_json(d));
    Json muas = Json::array();
    for (const auto& id : report.dispatched_muas) muas.push_back(id.str());

    Json j = Json::object();
    j["run_id"] = report.run_id;
    j["report_kind"] = to_string(report.report_kind);
    if (report.testing_type) j["testing_type"] = to_string(*report.testing_type);
    j["per_agent_results"] = std::move(per_agent);
    j["defects"] = std::move(defects);
    if (report.coverage) j["coverage"] = to_json(*report.coverage);
    if (report.reliability) j["reliability"] = to_json(*report.reliability);
    j["started"] = report.started;
    j["finished"] = report.finished;
    j["partial"] = report.partial;
    j["status"] = report.status;
    j["dispatched_muas"] = std::move(muas);
    return j;
}

Json to_json(const MessageHeader& header) {
    Json j = Json::object();
    j["message_id"] = header.message_id;
    j["sender"] = header.sender.str();
    j["recipient"] = header.recipient.str();
    if (header.correlation_id) j["correlation_id"] = *header.correlation_id;
    j["timestamp"] = header.timestamp;
    return j;
}

namespace {

Json test_request_fields(const TestRequest& request) {
    Json j = Json::object();
    j["testing_type"] = to_string(request.testing_type);
    j["suite"] = to_json(request.suite);
    j["constraints"] = request.constraints;
    return j;
}

}  // namespace

Json to_json(const MessageBody& body) {
    Json j = std::visit(
        [](const auto& b) -> Json {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, TestRequest>) {
                return test_request_fields(b);
            } else if constexpr (std::is_same_v<T, DefectNotice> ||
                                 std::is_same_v<T, TestCaseForward>) {
                Json j = Json::object();
                j["report"] = to_json(b.report);
                return j;
            } else if constexpr (std::is_same_v<T, SuiteRequest>) {
                Json j = Json::object();
                j["testing_type"] = to_string(b.testing_type);
                j["constraints"] = b.constraints;
                return j;
            } else if constexpr (std::is_same_v<T, SuiteResponse>) {
                Json j = Json::object();
                j["suite"] = to_json(b.suite);
                if (b.error) j["error"] = *b.error;
                return j;
            } else if constexpr (std::is_same_v<T, ResultReport>) {
                Json results = Json::array();
                for (const auto& r : b.results) results.push_back(to_json(r));
                Json j = Json::object();
                j["results"] = std::move(results);
                if (b.coverage) j["coverage"] = to_json(*b.coverage);
                j["partial"] = b.partial;
                return j;
            } else if constexpr (std::is_same_v<T, StatusQuery>) {
                return Json::object();
            } else if constexpr (std::is_same_v<T, StatusReply>) {
                Json j = Json::object();
                j["busy"] = b.busy;
                return j;
            } else if constexpr (std::is_same_v<T, DispatchAgent>) {
                Json j = Json::object();
                j["target_client"] = b.target_client;
                j["task"] = test_request_fields(b.task);
                return j;
            } else {
                static_assert(std::is_same_v<T, AggregateReport>);
                Json j = Json::object();
                j["report"] = to_json(b.report);
                return j;
            }
        },
        body);
    j["kind"] = std::string(body_kind(body));
    return j;
}

Json to_json(const Envelope& envelope) {
    Json j = Json::object();
    j["header"] = to_json(envelope.header);
    j["body"] = to_json(envelope.body);
    return j;
}

// ---------------------------------------------------------------------------
// from_json

ExpectedOutput expected_output_from_json(const Json& j) {
    ExpectedOutput out;
    out.operation_name = get_string(j, "operation_name", "ExpectedOutput");
    out.for_input = get_value(j, "for_input", "ExpectedOutput");
    out.value = get_value(j, "value", "ExpectedOutput");
    return out;
}

TestCase test_case_from_json(const Json& j) {
    TestCase out;
    out.id = get_string(j, "id", "TestCase");
    out.operation_name = get_string(j, "operation_name", "TestCase");
    out.input = get_value(j, "input", "TestCase");
    if (const Json* v = optional_field(j, "defect_type", "TestCase")) {
        if (!v->is_string()) schema_fail("TestCase", "field 'defect_type' must be a string");
        out.defect_type = v->get<std::string>();
    }
    if (const Json* v = optional_field(j, "expected_output", "TestCase"))
        out.expected_output = expected_output_from_json(*v);
    out.origin = get_enum(j, "origin", "TestCase", &case_origin_from_string);
    return out;
}

TestSuite test_suite_from_json(const Json& j) {
    TestSuite out;
    out.id = get_string(j, "id", "TestSuite");
    out.testing_type = get_enum(j, "testing_type", "TestSuite", &testing_type_from_string);
    for (const Json& c : get_array(j, "cases", "TestSuite")) out.cases.push_back(test_case_from_json(c));
    return out;
}

DefectReport defect_report_from_json(const Json& j) {
    DefectReport out;
    out.operation_name = get_string(j, "operation_name", "DefectReport");
    out.defect_type = get_string(j, "defect_type", "DefectReport");
    out.provoking_case = test_case_from_json(field(j, "provoking_case", "DefectReport"));
    out.discovered_by = get_agent_id(j, "discovered_by", "DefectReport");
    out.context = get_string_map(j, "context", "DefectReport");
    out.timestamp = get_uint(j, "timestamp", "DefectReport");
    return out;
}

TestResult test_result_from_json(const Json& j) {
    TestResult out;
    out.case_id = get_string(j, "case_id", "TestResult");
    out.verdict = get_enum(j, "verdict", "TestResult", &verdict_from_string);
    if (const Json* v = optional_field(j, "observed_output", "TestResult")) {
        require_canonical_value(*v, "TestResult.observed_output");
        out.observed_output = *v;
    }
    if (const Json* v = optional_field(j, "defect", "TestResult"))
        out.defect = defect_report_from_json(*v);
    if (const Json* v = optional_field(j, "note", "TestResult")) {
        if (!v->is_string()) schema_fail("TestResult", "field 'note' must be a string");
        out.note = v->get<std::string>();
    }
    return out;
}

CoverageSummary coverage_summary_from_json(const Json& j) {
    CoverageSummary out;
    out.criterion = get_enum(j, "criterion", "CoverageSummary", &coverage_criterion_from_string);
    out.covered = get_uint(j, "covered", "CoverageSummary");
    out.total = get_uint(j, "total", "CoverageSummary");
    out.ratio = get_double(j, "ratio", "CoverageSummary");
    for (const Json& item : get_array(j, "uncovered_items", "CoverageSummary")) {
        if (!item.is_string())
            schema_fail("CoverageSummary", "field 'uncovered_items' must hold strings");
        out.uncovered_items.push_back(item.get<std::string>());
    }
    return out;
}

ReliabilityEstimate reliability_estimate_from_json(const Json& j) {
    ReliabilityEstimate out;
    out.intervals = static_cast<std::uint32_t>(get_uint(j, "intervals", "ReliabilityEstimate"));
    for (const Json& item : get_array(j, "defects_per_interval", "ReliabilityEstimate")) {
        if (!item.is_number_unsigned())
            schema_fail("ReliabilityEstimate", "field 'defects_per_interval' must hold counts");
        out.defects_per_interval.push_back(item.get<std::uint64_t>());
    }
    out.failure_intensity = get_double(j, "failure_intensity", "ReliabilityEstimate");
    out.reliability_one_interval = get_double(j, "reliability_one_interval", "ReliabilityEstimate");
    return out;
}

FinalReport final_report_from_json(const Json& j) {
    FinalReport out;
    out.run_id = get_string(j, "run_id", "FinalReport");
    out.report_kind = get_enum(j, "report_kind", "FinalReport", &report_kind_from_string);
    if (const Json* v = optional_field(j, "testing_type", "FinalReport")) {
        if (!v->is_string()) schema_fail("FinalReport", "field 'testing_type' must be a string");
        try {
            out.testing_type = testing_type_from_string(v->get<std::string>());
        } catch (const Error& e) {
            schema_fail("FinalReport", e.what());
        }
    }
    const Json& per_agent = field(j, "per_agent_results", "FinalReport");
    if (!per_agent.is_object())
        schema_fail("FinalReport", "field 'per_agent_results' must be an object");
    for (const auto& [key, list] : per_agent.items()) {
        AgentId agent = parse_agent_id(key, "FinalReport.per_agent_results");
        if (!list.is_array())
            schema_fail("FinalReport", "per_agent_results values must be arrays");
        std::vector<TestResult> results;
        for (const Json& r : list) results.push_back(test_result_from_json(r));
        out.per_agent_results.emplace(agent, std::move(results));
    }
    for (const Json& d : get_array(j, "defects", "FinalReport"))
        out.defects.push_back(defect_report_from_json(d));
    if (const Json* v = optional_field(j, "coverage", "FinalReport"))
        out.coverage = coverage_summary_from_json(*v);
    if (const Json* v = optional_field(j, "reliability", "FinalReport"))
        out.reliability = reliability_estimate_from_json(*v);
    out.started = get_uint(j, "started", "FinalReport");
    out.finished = get_uint(j, "finished", "FinalReport");
    out.partial = get_bool(j, "partial", "FinalReport");
    out.status = get_string(j, "status", "FinalReport");
    for (const Json& id : get_array(j, "dispatched_muas", "FinalReport")) {
        if (!id.is_string()) schema_fail("FinalReport", "field 'dispatched_muas' must hold ids");
        out.dispatched_muas.push_back(
            parse_agent_id(id.get<std::string>(), "FinalReport.dispatched_muas"));
    }
    return out;
}

MessageHeader message_header_from_json(const Json& j) {
    MessageHeader out;
    out.message_id = get_string(j, "message_id", "MessageHeader");
    out.sender = get_agent_id(j, "sender", "MessageHeader");
    out.recipient = get_agent_id(j, "recipient", "MessageHeader");
    if (const Json* v = optional_field(j, "correlation_id", "MessageHeader")) {
        if (!v->is_string())
            schema_fail("MessageHeader", "field 'correlation_id' must be a string");
        out.correlation_id = v->get<std::string>();
    }
    out.timestamp = get_uint(j, "timestamp", "MessageHeader");
    return out;
}

namespace {

TestRequest test_request_from_fields(const Json& j, const char* context) {
    TestRequest out;
    out.testing_type = get_enum(j, "testing_type", context, &testing_type_from_string);
    out.suite = test_suite_from_json(field(j, "suite", context));
    out.constraints = get_string_map(j, "constraints", context);
    return out;
}

}  // namespace

MessageBody message_body_from_json(const Json& j) {
    std::string kind = get_string(j, "kind", "MessageBody");
    if (kind == "TestRequest") return test_request_from_fields(j, "TestRequest");
    if (kind == "DefectNotice")
        return DefectNotice{defect_report_from_json(field(j, "report", "DefectNotice"))};
    if (kind == "TestCaseForward")
        return TestCaseForward{defect_report_from_json(field(j, "report", "TestCaseForward"))};
    if (kind == "SuiteRequest") {
        SuiteRequest out;
        out.testing_type = get_enum(j, "testing_type", "SuiteRequest", &testing_type_from_string);
        out.constraints = get_string_map(j, "constraints", "SuiteRequest");
        return out;
    }
    if (kind == "SuiteResponse") {
        SuiteResponse out;
        out.suite = test_suite_from_json(field(j, "suite", "SuiteResponse"));
        if (const Json* v = optional_field(j, "error", "SuiteResponse")) {
            if (!v->is_string()) schema_fail("SuiteResponse", "field 'error' must be a string");
            out.error = v->get<std::string>();
        }
        return out;
    }
    if (kind == "ResultReport") {
        ResultReport out;
        for (const Json& r : get_array(j, "results", "ResultReport"))
            out.results.push_back(test_result_from_json(r));
        if (const Json* v = optional_field(j, "coverage", "ResultReport"))
            out.coverage = coverage_summary_from_json(*v);
        out.partial = get_bool(j, "partial", "ResultReport");
        return out;
    }
    if (kind == "StatusQuery") return StatusQuery{};
    if (kind == "StatusReply") return StatusReply{get_bool(j, "busy", "StatusReply")};
    if (kind == "DispatchAgent") {
        DispatchAgent out;
        out.target_client = get_string(j, "target_client", "DispatchAgent");
        out.task = test_request_from_fields(field(j, "task", "DispatchAgent"), "DispatchAgent.task");
        return out;
    }
    if (kind == "AggregateReport")
        return AggregateReport{final_report_from_json(field(j, "report", "AggregateReport"))};
    throw UnknownBodyKindError("unknown body kind '" + kind + "'");
}

Envelope envelope_from_json(const Json& j) {
    Envelope out;
    out.header = message_header_from_json(field(j, "header", "Envelope"));
    out.body = message_body_from_json(field(j, "body", "Envelope"));
    return out;
}

// ---------------------------------------------------------------------------
// Codec

std::string_view body_kind(const MessageBody& body) {
    return std::visit(
        [](const auto& b) -> std::string_view {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, TestRequest>) return "TestRequest";
            else if constexpr (std::is_same_v<T, DefectNotice>) return "DefectNotice";
            else if constexpr (std::is_same_v<T, TestCaseForward>) return "TestCaseForward";
            else if constexpr (std::is_same_v<T, SuiteRequest>) return "SuiteRequest";
            else if constexpr (std::is_same_v<T, SuiteResponse>) return "SuiteResponse";
            else if constexpr (std::is_same_v<T, ResultReport>) return "ResultReport";
            else if constexpr (std::is_same_v<T, StatusQuery>) return "StatusQuery";
            else if constexpr (std::is_same_v<T, StatusReply>) return "StatusReply";
            else if constexpr (std::is_same_v<T, DispatchAgent>) return "DispatchAgent";
            else {
                static_assert(std::is_same_v<T, AggregateReport>);
                return "AggregateReport";
            }
        },
        body);
}

std::string_view to_string(ReportKind kind) {
    switch (kind) {
        case ReportKind::Run: return "run";
        case ReportKind::MonitorAlert: return "monitor_alert";
        case ReportKind::RepositorySummary: return "repository_summary";
    }
    throw Error("unreachable report kind");
}

ReportKind report_kind_from_string(std::string_view text) {
    if (text == "run") return ReportKind::Run;
    if (text == "monitor_alert") return ReportKind::MonitorAlert;
    if (text == "repository_summary") return ReportKind::RepositorySummary;
    throw Error("unknown report kind '" + std::string(text) + "'");
}

std::string serialize(const Envelope& envelope) { return to_json(envelope).dump(); }

Envelope deserialize(std::string_view bytes) {
    Json j;
    try {
        j = Json::parse(bytes);
    } catch (const Json::parse_error& e) {
        throw MalformedMessageError(std::string("malformed message: ") + e.what());
    }
    return envelope_from_json(j);
}

}  // namespace triad
