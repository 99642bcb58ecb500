#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "triad/coverage.hpp"

namespace triad {

/// Declarative input-to-output mapping for one operation. Exactly one kind:
///   Table: explicit (input, output) pairs matched structurally, with an
///          optional default for unlisted inputs.
///   Expression: integer arithmetic over input fields, e.g. "in.x + in.y".
///   Lookup: dataset search; a hit returns the record, a miss returns
///           {"found": false} so the rule stays total.
struct BehaviorRule {
    enum class Kind { Table, Expression, Lookup };

    Kind kind{Kind::Table};
    std::vector<std::pair<Value, Value>> table;
    std::optional<Value> default_output;
    std::string expression;
    std::string dataset;
    std::string key_field;         // input field holding the lookup key
    std::string record_key_field;  // record field compared against it

    bool operator==(const BehaviorRule&) const = default;
};

/// One declared walk through a component graph, attributed to a tier.
struct TierWalk {
    std::string tier;  // "client" | "middleware" | "server"
    std::string component;
    std::vector<std::string> path;

    bool operator==(const TierWalk&) const = default;
};

struct OperationSpec {
    std::string name;
    std::vector<std::string> tiers;  // traversal order; always starts at "client"
    BehaviorRule behavior;
    std::vector<TierWalk> walks;
    std::vector<Value> example_inputs;
    Tick cost{1};  // execution ticks one call consumes

    bool operator==(const OperationSpec&) const = default;
};

enum class FaultKind { LinkFailure, InputValidation, RetrievalError };

std::string_view to_string(FaultKind kind);
FaultKind fault_kind_from_string(std::string_view text);

enum class RetrievalSubkind { MiddlewareFunction, InconsistentData };

std::string_view to_string(RetrievalSubkind subkind);
RetrievalSubkind retrieval_subkind_from_string(std::string_view text);

struct FaultTrigger {
    enum class Kind { Always, FieldEquals, FieldMatches, EveryNth };

    Kind kind{Kind::Always};
    std::string field;    // FieldEquals / FieldMatches
    Value equals;         // FieldEquals
    std::string pattern;  // FieldMatches, ECMAScript regex over the field text
    std::uint64_t n{1};   // EveryNth: fires on eligible calls n, 2n, ...

    bool operator==(const FaultTrigger&) const = default;
};

struct FaultSpec {
    std::string id;
    FaultKind kind{FaultKind::LinkFailure};
    std::optional<RetrievalSubkind> subkind;  // RetrievalError only
    std::string operation_name;
    FaultTrigger trigger;
    bool active{false};
    std::string defect_type;
    std::map<std::string, std::string> context;  // page_name, form_name, ...
    std::optional<Value> corrupt_output;         // InconsistentData substitute
    std::uint32_t cut{1};  // nodes kept of the faulting tier's walk

    bool operator==(const FaultSpec&) const = default;
};

struct ClientSpec {
    std::string id;
    std::string component;
    std::vector<std::string> operations;  // ops this client exposes; empty = all

    bool operator==(const ClientSpec&) const = default;

    bool allows(const std::string& operation_name) const;
};

/// A stress-suite seed: the operations stress cases cycle over.
struct StressCaseSpec {
    std::string operation_name;
    Value input = Value::object();

    bool operator==(const StressCaseSpec&) const = default;
};

struct SutModel {
    std::vector<ClientSpec> clients;
    std::map<std::string, ComponentGraph> components;
    std::vector<OperationSpec> operations;
    std::map<std::string, std::vector<Value>> datasets;
    std::vector<FaultSpec> faults;
    std::vector<StressCaseSpec> stress_base;

    bool operator==(const SutModel&) const = default;

    const OperationSpec* find_operation(const std::string& name) const;
    const ClientSpec* find_client(const std::string& id) const;
    const FaultSpec* find_fault(const std::string& id) const;
    bool has_tier(const OperationSpec& op, const std::string& tier) const;

    /// Structural and semantic validation; throws ModelError with the
    /// offending element named.
    void validate() const;
};

/// Parses and validates a model document. ModelError diagnostics carry the
/// JSON path of the offending element.
SutModel sut_model_from_json(const Json& j);
SutModel load_sut_model(const std::string& path);  // file load + parse

/// Integer arithmetic over "+ - * / ( )", literals, and input field
/// references ("in.x" or plain "x"). Throws ModelError on syntax errors,
/// unknown or non-integer fields, and division by zero.
std::int64_t eval_expression(const std::string& expression, const Value& input);

/// Evaluates an operation's behavior rule over pristine datasets (no faults).
/// Total for valid models; throws ModelError when a Table rule has no match
/// and no default.
Value declared_output(const SutModel& model, const OperationSpec& op, const Value& input);

}  // namespace triad
