#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "triad/core.hpp"
#include "triad/coverage.hpp"
#include "triad/reliability.hpp"

namespace triad {

struct MalformedMessageError : Error { using Error::Error; };
struct UnknownBodyKindError : Error { using Error::Error; };
struct SchemaViolationError : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Message bodies

/// Order to run a suite. An empty `suite.cases` asks the recipient to source
/// cases from the repository; `constraints` carries run parameters (scope,
/// clients, coverage criterion, volume, intervals) as plain strings.
struct TestRequest {
    TestingType testing_type{TestingType::Unit};
    TestSuite suite;
    std::map<std::string, std::string> constraints;

    bool operator==(const TestRequest&) const = default;
};

/// A checker announces a newly discovered defect.
struct DefectNotice {
    DefectReport report;

    bool operator==(const DefectNotice&) const = default;
};

/// Controller relays a discovered defect to the repository for storage.
struct TestCaseForward {
    DefectReport report;

    bool operator==(const TestCaseForward&) const = default;
};

struct SuiteRequest {
    TestingType testing_type{TestingType::Unit};
    std::map<std::string, std::string> constraints;

    bool operator==(const SuiteRequest&) const = default;
};

/// `error` is set (and the suite empty) when no suite can be served.
struct SuiteResponse {
    TestSuite suite;
    std::optional<std::string> error;

    bool operator==(const SuiteResponse&) const = default;
};

/// `partial` marks results cut short by the run deadline.
struct ResultReport {
    std::vector<TestResult> results;
    std::optional<CoverageSummary> coverage;
    bool partial{false};

    bool operator==(const ResultReport&) const = default;
};

struct StatusQuery {
    bool operator==(const StatusQuery&) const = default;
};

struct StatusReply {
    bool busy{false};

    bool operator==(const StatusReply&) const = default;
};

/// Sends a mobile agent to stand in for a busy checker on `target_client`.
struct DispatchAgent {
    std::string target_client;
    TestRequest task;

    bool operator==(const DispatchAgent&) const = default;
};

enum class ReportKind { Run, MonitorAlert, RepositorySummary };

std::string_view to_string(ReportKind kind);
ReportKind report_kind_from_string(std::string_view text);

/// End-of-run (or alert) summary. `defects` is the dedup_key-deduplicated
/// union of Fail-verdict defects across per_agent_results.
struct FinalReport {
    std::string run_id;
    ReportKind report_kind{ReportKind::Run};
    std::optional<TestingType> testing_type;
    std::map<AgentId, std::vector<TestResult>> per_agent_results;
    std::vector<DefectReport> defects;
    std::optional<CoverageSummary> coverage;
    std::optional<ReliabilityEstimate> reliability;
    Tick started{0};
    Tick finished{0};
    bool partial{false};
    std::string status{"ok"};
    std::vector<AgentId> dispatched_muas;

    bool operator==(const FinalReport&) const = default;
};

struct AggregateReport {
    FinalReport report;

    bool operator==(const AggregateReport&) const = default;
};

using MessageBody = std::variant<TestRequest, DefectNotice, TestCaseForward, SuiteRequest,
                                 SuiteResponse, ResultReport, StatusQuery, StatusReply,
                                 DispatchAgent, AggregateReport>;

/// The wire discriminator, e.g. "TestRequest".
std::string_view body_kind(const MessageBody& body);

// ---------------------------------------------------------------------------
// Envelope

struct MessageHeader {
    std::string message_id;
    AgentId sender;
    AgentId recipient;
    std::optional<std::string> correlation_id;  // request's message_id, on replies
    Tick timestamp{0};

    bool operator==(const MessageHeader&) const = default;
};

struct Envelope {
    MessageHeader header;
    MessageBody body;

    bool operator==(const Envelope&) const = default;
};

///// Canonical encoding: single-line UTF-8 JSON {"body":{...},"header":{...}}
/// with object keys sorted lexicographically, absent optionals omitted, and
/// the body tagged by "kind". Equal envelopes yield identical bytes. Throws
/// SchemaViolationError if an embedded Value holds a null or a non-finite
/// number.
std::string serialize(const Envelope& envelope);

/// Inverse of serialize on its image. Throws MalformedMessageError on JSON
/// syntax errors, UnknownBodyKindError on an unrecognized "kind", and
/// SchemaViolationError on missing or ill-typed fields.
Envelope deserialize(std::string_view bytes);

/// Rejects nulls and non-finite numbers anywhere inside a value. `where`
/// names the offending field in the error message.
void require_canonical_value(const Value& value, const std::string& where);

// ---------------------------------------------------------------------------
// Json conversions (shared by the codec, persistence, and the CLI)

Json to_json(const ExpectedOutput& expected);
Json to_json(const TestCase& test_case);
Json to_json(const TestSuite& suite);
Json to_json(const DefectReport& report);
Json to_json(const TestResult& result);
Json to_json(const CoverageSummary& summary);
Json to_json(const ReliabilityEstimate& estimate);
Json to_json(const FinalReport& report);
Json to_json(const MessageHeader& header);
Json to_json(const MessageBody& body);
Json to_json(const Envelope& envelope);

ExpectedOutput expected_output_from_json(const Json& j);
TestCase test_case_from_json(const Json& j);
TestSuite test_suite_from_json(const Json& j);
DefectReport defect_report_from_json(const Json& j);
TestResult test_result_from_json(const Json& j);
CoverageSummary coverage_summary_from_json(const Json& j);
ReliabilityEstimate reliability_estimate_from_json(const Json& j);
FinalReport final_report_from_json(const Json& j);
MessageHeader message_header_from_json(const Json& j);
MessageBody message_body_from_json(const Json& j);
Envelope envelope_from_json(const Json& j);

}  // namespace triad
