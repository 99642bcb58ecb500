#include "triad/sut_model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace triad {

namespace {

[[noreturn]] void model_fail(const std::string& where, const std::string& detail) {
    throw ModelError(where + ": " + detail);
}

const Json& need(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object()) model_fail(where, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) model_fail(where, std::string("missing field '") + key + "'");
    return *it;
}

std::string need_string(const Json& j, const char* key, const std::string& where) {
    const Json& v = need(j, key, where);
    if (!v.is_string()) model_fail(where, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

const std::set<std::string> kKnownTiers{"client", "middleware", "server"};

}  // namespace

std::string_view to_string(FaultKind kind) {
    switch (kind) {
        case FaultKind::LinkFailure: return "link_failure";
        case FaultKind::InputValidation: return "input_validation";
        case FaultKind::RetrievalError: return "retrieval_error";
    }
    throw Error("unreachable fault kind");
}

FaultKind fault_kind_from_string(std::string_view text) {
    if (text == "link_failure") return FaultKind::LinkFailure;
    if (text == "input_validation") return FaultKind::InputValidation;
    if (text == "retrieval_error") return FaultKind::RetrievalError;
    throw Error("unknown fault kind '" + std::string(text) + "'");
}

std::string_view to_string(RetrievalSubkind subkind) {
    switch (subkind) {
        case RetrievalSubkind::MiddlewareFunction: return "middleware_function";
        case RetrievalSubkind::InconsistentData: return "inconsistent_data";
    }
    throw Error("unreachable retrieval subkind");
}

RetrievalSubkind retrieval_subkind_from_string(std::string_view text) {
    if (text == "middleware_function") return RetrievalSubkind::MiddlewareFunction;
    if (text == "inconsistent_data") return RetrievalSubkind::InconsistentData;
    throw Error("unknown retrieval subkind '" + std::string(text) + "'");
}

const OperationSpec* SutModel::find_operation(const std::string& name) const {
    for (const auto& op : operations) {
        if (op.name == name) return &op;
    }
    return nullptr;
}

bool ClientSpec::allows(const std::string& operation_name) const {
    if (operations.empty()) return true;
    return std::find(operations.begin(), operations.end(), operation_name) != operations.end();
}

const ClientSpec* SutModel::find_client(const std::string& id) const {
    for (const auto& client : clients) {
        if (client.id == id) return &client;
    }
    return nullptr;
}

const FaultSpec* SutModel::find_fault(const std::string& id) const {
    for (const auto& fault : faults) {
        if (fault.id == id) return &fault;
    }
    return nullptr;
}

bool SutModel::has_tier(const OperationSpec& op, const std::string& tier) const {
    return std::find(op.tiers.begin(), op.tiers.end(), tier) != op.tiers.end();
}

// ---------------------------------------------------------------------------
// Expression evaluation

namespace {

class ExpressionParser {
  public:
    ExpressionParser(const std::string& text, const Value& input) : text_(text), input_(input) {}

    std::int64_t parse() {
        std::int64_t value = expression();
        skip_space();
        if (pos_ != text_.size()) fail("trailing characters");
        return value;
    }

  private:
    [[noreturn]] void fail(const std::string& detail) {
        model_fail("expression '" + text_ + "'", detail);
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::int64_t expression() {
        std::int64_t value = term();
        while (true) {
            if (eat('+')) value += term();
            else if (eat('-')) value -= term();
            else return value;
        }
    }

    std::int64_t term() {
        std::int64_t value = factor();
        while (true) {
            if (eat('*')) {
                value *= factor();
            } else if (eat('/')) {
                std::int64_t divisor = factor();
                if (divisor == 0) fail("division by zero");
                value /= divisor;
            } else {
                return value;
            }
        }
    }

    std::int64_t factor() {
        skip_space();
        if (eat('-')) return -factor();
        if (eat('(')) {
            std::int64_t value = expression();
            if (!eat(')')) fail("expected ')'");
            return value;
        }
        if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            std::size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
            return std::stoll(text_.substr(start, pos_ - start));
        }
        return field_reference();
    }

    std::int64_t field_reference() {
        skip_space();
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' ||
                text_[pos_] == '.'))
            ++pos_;
        if (start == pos_) fail("expected a number or field reference");
        std::string name = text_.substr(start, pos_ - start);
        if (name.rfind("in.", 0) == 0) name = name.substr(3);
        if (name.empty()) fail("empty field reference");
        if (!input_.is_object() || !input_.contains(name))
            fail("input has no field '" + name + "'");
        const Value& v = input_.at(name);
        if (!v.is_number_integer() && !v.is_number_unsigned())
            fail("field '" + name + "' is not an integer");
        return v.get<std::int64_t>();
    }

    const std::string& text_;
    const Value& input_;
    std::size_t pos_{0};
};

}  // namespace

std::int64_t eval_expression(const std::string& expression, const Value& input) {
    return ExpressionParser(expression, input).parse();
}

Value declared_output(const SutModel& model, const OperationSpec& op, const Value& input) {
    const BehaviorRule& rule = op.behavior;
    switch (rule.kind) {
        case BehaviorRule::Kind::Table: {
            for (const auto& [in, out] : rule.table) {
                if (in == input) return out;
            }
            if (rule.default_output) return *rule.default_output;
            model_fail("operation '" + op.name + "'",
                       "table rule has no entry for input " + input.dump() + " and no default");
        }
        case BehaviorRule::Kind::Expression:
            return Value(eval_expression(rule.expression, input));
        case BehaviorRule::Kind::Lookup: {
            auto it = model.datasets.find(rule.dataset);
            if (it == model.datasets.end())
                model_fail("operation '" + op.name + "'", "unknown dataset '" + rule.dataset + "'");
            if (input.is_object() && input.contains(rule.key_field)) {
                const Value& key = input.at(rule.key_field);
                for (const Value& record : it->second) {
                    if (record.is_object() && record.contains(rule.record_key_field) &&
                        record.at(rule.record_key_field) == key)
                        return record;
                }
            }
            return Json{{"found", false}};
        }
    }
    throw Error("unreachable behavior kind");
}

// ---------------------------------------------------------------------------
// Validation

void SutModel::validate() const {
    if (clients.empty()) throw ModelError("model declares no clients");
    std::set<std::string> client_ids;
    for (const auto& client : clients) {
        if (!client_ids.insert(client.id).second)
            model_fail("client '" + client.id + "'", "duplicate id");
        if (!components.count(client.component))
            model_fail("client '" + client.id + "'", "unknown component '" + client.component + "'");
        for (const auto& op_name : client.operations) {
            if (!find_operation(op_name))
                model_fail("client '" + client.id + "'", "unknown operation '" + op_name + "'");
        }
    }

    for (const auto& [name, graph] : components) {
        try {
            graph.validate();
        } catch (const ModelError& e) {
            model_fail("component '" + name + "'", e.what());
        }
    }

    std::set<std::string> op_names;
    for (const auto& op : operations) {
        const std::string where = "operation '" + op.name + "'";
        if (op.name.empty()) model_fail(where, "empty name");
        if (!op_names.insert(op.name).second) model_fail(where, "duplicate name");
        if (op.tiers.empty() || op.tiers.front() != "client")
            model_fail(where, "tier path must start at 'client'");
        for (const auto& tier : op.tiers) {
            if (!kKnownTiers.count(tier)) model_fail(where, "unknown tier '" + tier + "'");
        }
        if (op.cost == 0) model_fail(where, "cost must be positive");

        for (const auto& walk : op.walks) {
            if (!kKnownTiers.count(walk.tier)) model_fail(where, "walk on unknown tier");
            if (std::find(op.tiers.begin(), op.tiers.end(), walk.tier) == op.tiers.end())
                model_fail(where, "walk for tier '" + walk.tier + "' not in tier path");
            auto it = components.find(walk.component);
            if (it == components.end())
                model_fail(where, "walk references unknown component '" + walk.component + "'");
            const ComponentGraph& g = it->second;
            if (walk.path.empty() || walk.path.front() != g.entry)
                model_fail(where, "walk does not start at component entry");
            for (std::size_t i = 0; i + 1 < walk.path.size(); ++i) {
                if (!g.has_edge(walk.path[i], walk.path[i + 1]))
                    model_fail(where, "walk step " + walk.path[i] + "->" + walk.path[i + 1] +
                                          " is not an edge of " + walk.component);
            }
        }

        switch (op.behavior.kind) {
            case BehaviorRule::Kind::Table:
                break;
            case BehaviorRule::Kind::Expression:
                if (op.behavior.expression.empty()) model_fail(where, "empty expression");
                break;
            case BehaviorRule::Kind::Lookup:
                if (!datasets.count(op.behavior.dataset))
                    model_fail(where, "lookup references unknown dataset '" + op.behavior.dataset + "'");
                if (op.behavior.key_field.empty() || op.behavior.record_key_field.empty())
                    model_fail(where, "lookup needs key_field and record_key_field");
                break;
        }

        // Totality over declared example inputs.
        for (const auto& input : op.example_inputs) {
            try {
                declared_output(*this, op, input);
            } catch (const ModelError& e) {
                model_fail(where, std::string("behavior not total: ") + e.what());
            }
        }
    }

    std::set<std::string> fault_ids;
    for (const auto& fault : faults) {
        const std::string where = "fault '" + fault.id + "'";
        if (fault.id.empty()) model_fail(where, "empty id");
        if (!fault_ids.insert(fault.id).second) model_fail(where, "duplicate id");
        const OperationSpec* op = find_operation(fault.operation_name);
        if (op == nullptr)
            model_fail(where, "unknown target operation '" + fault.operation_name + "'");
        if (fault.kind == FaultKind::RetrievalError) {
            if (!fault.subkind) model_fail(where, "retrieval_error needs a subkind");
            if (!has_tier(*op, "middleware"))
                model_fail(where, "retrieval_error targets an operation without a middleware tier");
            if (*fault.subkind == RetrievalSubkind::InconsistentData && !fault.corrupt_output)
                model_fail(where, "inconsistent_data needs corrupt_output");
        } else if (fault.subkind) {
            model_fail(where, "subkind is only valid for retrieval_error");
        }
        const bool silent = fault.kind == FaultKind::RetrievalError &&
                            *fault.subkind == RetrievalSubkind::InconsistentData;
        if (!silent && fault.defect_type.empty()) model_fail(where, "empty defect_type");
        switch (fault.trigger.kind) {
            case FaultTrigger::Kind::Always:
                break;
            case FaultTrigger::Kind::FieldEquals:
            case FaultTrigger::Kind::FieldMatches:
                if (fault.trigger.field.empty()) model_fail(where, "trigger needs a field");
                break;
            case FaultTrigger::Kind::EveryNth:
                if (fault.trigger.n == 0) model_fail(where, "every_nth trigger needs n >= 1");
                break;
        }
    }

    for (const auto& stress : stress_base) {
        if (find_operation(stress.operation_name) == nullptr)
            model_fail("stress_base", "unknown operation '" + stress.operation_name + "'");
    }

    for (const auto& [name, records] : datasets) {
        for (const auto& record : records) {
            if (!record.is_object())
                model_fail("dataset '" + name + "'", "records must be objects");
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

ComponentGraph graph_from_json(const Json& j, const std::string& where) {
    ComponentGraph g;
    g.entry = need_string(j, "entry", where);
    g.exit = need_string(j, "exit", where);
    const Json& nodes = need(j, "nodes", where);
    if (!nodes.is_array()) model_fail(where, "'nodes' must be an array");
    for (const Json& n : nodes) {
        if (!n.is_string()) model_fail(where, "'nodes' must hold strings");
        g.nodes.push_back(n.get<std::string>());
    }
    const Json& edges = need(j, "edges", where);
    if (!edges.is_array()) model_fail(where, "'edges' must be an array");
    for (const Json& e : edges) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
            model_fail(where, "each edge must be a [from, to] pair");
        g.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
    for (const char* key : {"defs", "uses"}) {
        auto it = j.find(key);
        if (it == j.end()) continue;
        if (!it->is_object()) model_fail(where, std::string("'") + key + "' must be an object");
        auto& target = std::string(key) == "defs" ? g.defs : g.uses;
        for (const auto& [node, vars] : it->items()) {
            if (!vars.is_array()) model_fail(where, std::string("'") + key + "' values must be arrays");
            for (const Json& v : vars) {
                if (!v.is_string()) model_fail(where, "variable names must be strings");
                target[node].insert(v.get<std::string>());
            }
        }
    }
    return g;
}

BehaviorRule behavior_from_json(const Json& j, const std::string& where) {
    BehaviorRule rule;
    const std::string kind = need_string(j, "kind", where);
    if (kind == "table") {
        rule.kind = BehaviorRule::Kind::Table;
        const Json& table = need(j, "table", where);
        if (!table.is_array()) model_fail(where, "'table' must be an array");
        for (const Json& row : table) {
            rule.table.emplace_back(need(row, "input", where), need(row, "output", where));
        }
        if (j.contains("default")) rule.default_output = j.at("default");
    } else if (kind == "expression") {
        rule.kind = BehaviorRule::Kind::Expression;
        rule.expression = need_string(j, "expression", where);
    } else if (kind == "lookup") {
        rule.kind = BehaviorRule::Kind::Lookup;
        rule.dataset = need_string(j, "dataset", where);
        rule.key_field = need_string(j, "key_field", where);
        rule.record_key_field = need_string(j, "record_key_field", where);
    } else {
        model_fail(where, "unknown behavior kind '" + kind + "'");
    }
    return rule;
}

FaultTrigger trigger_from_json(const Json& j, const std::string& where) {
    FaultTrigger trigger;
    const std::string kind = need_string(j, "kind", where);
    if (kind == "always") {
        trigger.kind = FaultTrigger::Kind::Always;
    } else if (kind == "field_equals") {
        trigger.kind = FaultTrigger::Kind::FieldEquals;
        trigger.field = need_string(j, "field", where);
        trigger.equals = need(j, "equals", where);
    } else if (kind == "field_matches") {
        trigger.kind = FaultTrigger::Kind::FieldMatches;
        trigger.field = need_string(j, "field", where);
        trigger.pattern = need_string(j, "pattern", where);
    } else if (kind == "every_nth") {
        trigger.kind = FaultTrigger::Kind::EveryNth;
        const Json& n = need(j, "n", where);
        if (!n.is_number_unsigned()) model_fail(where, "'n' must be a positive integer");
        trigger.n = n.get<std::uint64_t>();
    } else {
        model_fail(where, "unknown trigger kind '" + kind + "'");
    }
    return trigger;
}

}  // namespace

SutModel sut_model_from_json(const Json& j) {
    SutModel model;
    const std::string root = "model";

    const Json& clients = need(j, "clients", root);
    if (!clients.is_array()) model_fail(root, "'clients' must be an array");
    for (const Json& c : clients) {
        ClientSpec client;
        client.id = need_string(c, "id", "client");
        client.component = need_string(c, "component", "client '" + client.id + "'");
        if (c.contains("operations")) {
            const Json& ops = c.at("operations");
            if (!ops.is_array()) model_fail("client '" + client.id + "'", "'operations' must be an array");
            for (const Json& name : ops) {
                if (!name.is_string()) model_fail("client '" + client.id + "'", "operation names must be strings");
                client.operations.push_back(name.get<std::string>());
            }
        }
        model.clients.push_back(std::move(client));
    }

    const Json& components = need(j, "components", root);
    if (!components.is_object()) model_fail(root, "'components' must be an object");
    for (const auto& [name, g] : components.items())
        model.components[name] = graph_from_json(g, "component '" + name + "'");

    if (j.contains("datasets")) {
        const Json& datasets = j.at("datasets");
        if (!datasets.is_object()) model_fail(root, "'datasets' must be an object");
        for (const auto& [name, records] : datasets.items()) {
            if (!records.is_array())
                model_fail("dataset '" + name + "'", "must be an array of records");
            model.datasets[name] = std::vector<Value>(records.begin(), records.end());
        }
    }

    const Json& operations = need(j, "operations", root);
    if (!operations.is_array()) model_fail(root, "'operations' must be an array");
    for (const Json& o : operations) {
        OperationSpec op;
        op.name = need_string(o, "name", "operation");
        const std::string where = "operation '" + op.name + "'";
        const Json& tiers = need(o, "tiers", where);
        if (!tiers.is_array()) model_fail(where, "'tiers' must be an array");
        for (const Json& t : tiers) {
            if (!t.is_string()) model_fail(where, "tier names must be strings");
            op.tiers.push_back(t.get<std::string>());
        }
        op.behavior = behavior_from_json(need(o, "behavior", where), where);
        if (o.contains("walks")) {
            const Json& walks = o.at("walks");
            if (!walks.is_array()) model_fail(where, "'walks' must be an array");
            for (const Json& w : walks) {
                TierWalk walk;
                walk.tier = need_string(w, "tier", where);
                walk.component = need_string(w, "component", where);
                const Json& path = need(w, "path", where);
                if (!path.is_array()) model_fail(where, "walk 'path' must be an array");
                for (const Json& n : path) {
                    if (!n.is_string()) model_fail(where, "walk path nodes must be strings");
                    walk.path.push_back(n.get<std::string>());
                }
                op.walks.push_back(std::move(walk));
            }
        }
        if (o.contains("example_inputs")) {
            const Json& inputs = o.at("example_inputs");
            if (!inputs.is_array()) model_fail(where, "'example_inputs' must be an array");
            op.example_inputs = std::vector<Value>(inputs.begin(), inputs.end());
        }
        if (o.contains("cost")) {
            const Json& cost = o.at("cost");
            if (!cost.is_number_unsigned()) model_fail(where, "'cost' must be a positive integer");
            op.cost = cost.get<Tick>();
        }
        model.operations.push_back(std::move(op));
    }

    if (j.contains("faults")) {
        const Json& faults = j.at("faults");
        if (!faults.is_array()) model_fail(root, "'faults' must be an array");
        for (const Json& f : faults) {
            FaultSpec fault;
            fault.id = need_string(f, "id", "fault");
            const std::string where = "fault '" + fault.id + "'";
            try {
                fault.kind = fault_kind_from_string(need_string(f, "kind", where));
            } catch (const Error& e) {
                model_fail(where, e.what());
            }
            if (f.contains("subkind")) {
                try {
                    fault.subkind = retrieval_subkind_from_string(need_string(f, "subkind", where));
                } catch (const Error& e) {
                    model_fail(where, e.what());
                }
            }
            fault.operation_name = need_string(f, "operation", where);
            fault.trigger = trigger_from_json(need(f, "trigger", where), where);
            if (f.contains("active")) {
                if (!f.at("active").is_boolean()) model_fail(where, "'active' must be a boolean");
                fault.active = f.at("active").get<bool>();
            }
            if (f.contains("defect_type")) fault.defect_type = need_string(f, "defect_type", where);
            if (f.contains("context")) {
                const Json& ctx = f.at("context");
                if (!ctx.is_object()) model_fail(where, "'context' must be an object");
                for (const auto& [k, v] : ctx.items()) {
                    if (!v.is_string()) model_fail(where, "'context' values must be strings");
                    fault.context[k] = v.get<std::string>();
                }
            }
            if (f.contains("corrupt_output")) fault.corrupt_output = f.at("corrupt_output");
            if (f.contains("cut")) {
                if (!f.at("cut").is_number_unsigned())
                    model_fail(where, "'cut' must be a positive integer");
                fault.cut = f.at("cut").get<std::uint32_t>();
            }
            model.faults.push_back(std::move(fault));
        }
    }

    if (j.contains("stress_base")) {
        const Json& stress = j.at("stress_base");
        if (!stress.is_array()) model_fail(root, "'stress_base' must be an array");
        for (const Json& s : stress) {
            StressCaseSpec spec;
            spec.operation_name = need_string(s, "operation", "stress_base");
            spec.input = need(s, "input", "stress_base");
            model.stress_base.push_back(std::move(spec));
        }
    }

    model.validate();
    return model;
}

SutModel load_sut_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open model file: " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ModelError("model file " + path + " does not parse: " + e.what());
    }
    return sut_model_from_json(j);
}

}  // namespace triad
