#include "triad/core.hpp"

#include <charconv>
#include <set>

namespace triad {

std::string_view to_string(AgentRole role) {
    switch (role) {
        case AgentRole::Dra: return "DRA";
        case AgentRole::Mca: return "MCA";
        case AgentRole::Cca: return "CCA";
        case AgentRole::Mua: return "MUA";
        case AgentRole::Tester: return "TESTER";
    }
    throw Error("unknown agent role");
}

std::string AgentId::str() const {
    return std::string(to_string(role)) + "-" + std::to_string(instance);
}

AgentId AgentId::parse(std::string_view text) {
    auto dash = text.rfind('-');
    if (dash == std::string_view::npos || dash + 1 >= text.size()) {
        throw Error("bad agent id: " + std::string(text));
    }
    std::string_view name = text.substr(0, dash);
    std::string_view num = text.substr(dash + 1);
    AgentRole role;
    if (name == "DRA") role = AgentRole::Dra;
    else if (name == "MCA") role = AgentRole::Mca;
    else if (name == "CCA") role = AgentRole::Cca;
    else if (name == "MUA") role = AgentRole::Mua;
    else if (name == "TESTER") role = AgentRole::Tester;
    else throw Error("bad agent role: " + std::string(text));
    int instance = 0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), instance);
    if (ec != std::errc{} || ptr != num.data() + num.size() || instance < 0) {
        throw Error("bad agent instance: " + std::string(text));
    }
    return {role, instance};
}

std::string_view to_string(TestingType type) {
    switch (type) {
        case TestingType::Unit: return "unit";
        case TestingType::Integration: return "integration";
        case TestingType::Regression: return "regression";
        case TestingType::Stress: return "stress";
    }
    throw Error("unknown testing type");
}

TestingType testing_type_from_string(std::string_view text) {
    if (text == "unit") return TestingType::Unit;
    if (text == "integration") return TestingType::Integration;
    if (text == "regression") return TestingType::Regression;
    if (text == "stress") return TestingType::Stress;
    throw Error("bad testing type: " + std::string(text));
}

std::string_view to_string(CaseOrigin origin) {
    switch (origin) {
        case CaseOrigin::InitialSuite: return "initial_suite";
        case CaseOrigin::DiscoveredByCca: return "discovered_by_cca";
        case CaseOrigin::DiscoveredByMua: return "discovered_by_mua";
        case CaseOrigin::GeneratedByDra: return "generated_by_dra";
    }
    throw Error("unknown case origin");
}

CaseOrigin case_origin_from_string(std::string_view text) {
    if (text == "initial_suite") return CaseOrigin::InitialSuite;
    if (text == "discovered_by_cca") return CaseOrigin::DiscoveredByCca;
    if (text == "discovered_by_mua") return CaseOrigin::DiscoveredByMua;
    if (text == "generated_by_dra") return CaseOrigin::GeneratedByDra;
    throw Error("bad case origin: " + std::string(text));
}

std::string_view to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        case Verdict::Error: return "error";
    }
    throw Error("unknown verdict");
}

Verdict verdict_from_string(std::string_view text) {
    if (text == "pass") return Verdict::Pass;
    if (text == "fail") return Verdict::Fail;
    if (text == "error") return Verdict::Error;
    throw Error("bad verdict: " + std::string(text));
}

void TestSuite::validate() const {
    std::set<std::string> seen;
    for (const auto& test_case : cases) {
        if (!seen.insert(test_case.id).second) {
            throw ModelError("duplicate case id in suite " + id + ": " + test_case.id);
        }
    }
}

DedupKey dedup_key(const DefectReport& report) {
    if (report.defect_type.empty()) throw MissingFieldError("defect report has empty defect_type");
    if (report.operation_name.empty()) throw MissingFieldError("defect report has empty operation_name");
    return {report.defect_type, report.operation_name};
}

DedupKey dedup_key(const TestCase& test_case) {
    if (!test_case.defect_type || test_case.defect_type->empty()) {
        throw MissingFieldError("test case " + test_case.id + " has no defect_type");
    }
    if (test_case.operation_name.empty()) {
        throw MissingFieldError("test case " + test_case.id + " has empty operation_name");
    }
    return {*test_case.defect_type, test_case.operation_name};
}

Verdict verdict_of(const Value& observed, const ExpectedOutput& expected) {
    return observed == expected.value ? Verdict::Pass : Verdict::Fail;
}

}  // namespace triad
