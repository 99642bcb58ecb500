#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace triad {

using Json = nlohmann::json;

/// A scalar (string, integer, float, boolean) or a structure (map/list of
/// values). Equality is structural; map key order never matters.
using Value = nlohmann::json;

/// Logical time. The runtime's clock, not wall time.
using Tick = std::uint64_t;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingFieldError : Error { using Error::Error; };
struct ModelError : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Agent identity

enum class AgentRole { Dra, Mca, Cca, Mua, Tester };

std::string_view to_string(AgentRole role);

/// DRA and MCA are singletons (instance 0); CCAs and MUAs are plural.
/// Rendered as "CCA-1", "DRA-0", etc.
struct AgentId {
    AgentRole role{AgentRole::Dra};
    int instance{0};

    auto operator<=>(const AgentId&) const = default;

    std::string str() const;
    static AgentId parse(std::string_view text);  // throws Error on bad form

    static AgentId dra() { return {AgentRole::Dra, 0}; }
    static AgentId mca() { return {AgentRole::Mca, 0}; }
    static AgentId cca(int instance) { return {AgentRole::Cca, instance}; }
    static AgentId mua(int instance) { return {AgentRole::Mua, instance}; }
    static AgentId tester() { return {AgentRole::Tester, 0}; }
};

// ---------------------------------------------------------------------------
// Testing vocabulary

enum class TestingType { Unit, Integration, Regression, Stress };

std::string_view to_string(TestingType type);
TestingType testing_type_from_string(std::string_view text);

enum class CaseOrigin { InitialSuite, DiscoveredByCca, DiscoveredByMua, GeneratedByDra };

std::string_view to_string(CaseOrigin origin);
CaseOrigin case_origin_from_string(std::string_view text);

/// An expected output derived from the system model: what `operation_name`
/// should produce for `for_input` with no faults active.
struct ExpectedOutput {
    std::string operation_name;
    Value for_input = Value::object();
    Value value;

    bool operator==(const ExpectedOutput&) const = default;
};

struct TestCase {
    std::string id;
    std::string operation_name;
    Value input = Value::object();
    std::optional<std::string> defect_type;  // set when derived from a defect
    std::optional<ExpectedOutput> expected_output;
    CaseOrigin origin{CaseOrigin::InitialSuite};

    bool operator==(const TestCase&) const = default;
};

struct TestSuite {
    std::string id;
    TestingType testing_type{TestingType::Unit};
    std::vector<TestCase> cases;

    bool operator==(const TestSuite&) const = default;

    /// Enforces the unique-id invariant. Throws ModelError on duplicates.
    void validate() const;
};

struct DefectReport {
    std::string operation_name;
    std::string defect_type;
    TestCase provoking_case;
    AgentId discovered_by;
    std::map<std::string, std::string> context;  // e.g. page_name, form_name, tier
    Tick timestamp{0};

    bool operator==(const DefectReport&) const = default;
};

enum class Verdict { Pass, Fail, Error };

std::string_view to_string(Verdict verdict);
Verdict verdict_from_string(std::string_view text);

struct TestResult {
    std::string case_id;
    Verdict verdict{Verdict::Pass};
    std::optional<Value> observed_output;
    std::optional<DefectReport> defect;  // present iff verdict == Fail
    std::optional<std::string> note;     // e.g. "misrouted"

    bool operator==(const TestResult&) const = default;
};

// ---------------------------------------------------------------------------
// Operations

/// (defect_type, operation_name): the metric deciding whether two defects
/// describe the same problem. Exact, case-sensitive string equality.
using DedupKey = std::pair<std::string, std::string>;

DedupKey dedup_key(const DefectReport& report);
DedupKey dedup_key(const TestCase& test_case);  // requires defect_type present

/// Pass iff observed structurally equals the expected value. Callers must
/// not invoke this when no expected output exists.
Verdict verdict_of(const Value& observed, const ExpectedOutput& expected);

}  // namespace triad
