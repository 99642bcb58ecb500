#include "triad/sut_sim.hpp"

#include <algorithm>
#include <fstream>
#include <regex>

namespace triad {

std::string_view to_string(ExecMode mode) {
    switch (mode) {
        case ExecMode::Full: return "full";
        case ExecMode::ClientUnit: return "client_unit";
        case ExecMode::MiddlewareUnit: return "middleware_unit";
        case ExecMode::Declared: return "declared";
    }
    throw Error("unreachable exec mode");
}

void UserSessionScript::validate() const {
    for (std::size_t i = 0; i + 1 < actions.size(); ++i) {
        if (actions[i + 1].tick <= actions[i].tick)
            throw ModelError("session '" + session + "' ticks must be strictly increasing");
    }
}

UserSessionScript generate_session(const SutModel& model, const std::string& session,
                                   std::uint64_t seed, int action_count, Tick start_tick,
                                   Tick gap) {
    if (gap == 0) gap = 1;
    std::vector<std::pair<std::string, Value>> pool;
    for (const auto& op : model.operations) {
        for (const auto& input : op.example_inputs) pool.emplace_back(op.name, input);
    }
    UserSessionScript script;
    script.session = session;
    script.seed = seed;
    if (pool.empty()) return script;

    std::mt19937_64 rng(seed);
    Tick tick = start_tick;
    for (int i = 0; i < action_count; ++i) {
        const auto& [op, input] = pool[rng() % pool.size()];
        script.actions.push_back({op, input, tick});
        tick += gap;
    }
    return script;
}

SutSimulator::SutSimulator(SutModel model) : model_(std::move(model)) {
    model_.validate();
    for (const auto& fault : model_.faults) active_[fault.id] = fault.active;
}

void SutSimulator::set_fault(const std::string& fault_id, bool active) {
    auto it = active_.find(fault_id);
    if (it == active_.end()) throw UnknownFaultError("unknown fault '" + fault_id + "'");
    it->second = active;
}

bool SutSimulator::fault_active(const std::string& fault_id) const {
    auto it = active_.find(fault_id);
    if (it == active_.end()) throw UnknownFaultError("unknown fault '" + fault_id + "'");
    return it->second;
}

bool SutSimulator::trigger_fires(const FaultSpec& fault, const Value& input) {
    switch (fault.trigger.kind) {
        case FaultTrigger::Kind::Always:
            return true;
        case FaultTrigger::Kind::FieldEquals:
            return input.is_object() && input.contains(fault.trigger.field) &&
                   input.at(fault.trigger.field) == fault.trigger.equals;
        case FaultTrigger::Kind::FieldMatches: {
            if (!input.is_object() || !input.contains(fault.trigger.field)) return false;
            const Value& v = input.at(fault.trigger.field);
            const std::string text = v.is_string() ? v.get<std::string>() : v.dump();
            return std::regex_match(text, std::regex(fault.trigger.pattern));
        }
        case FaultTrigger::Kind::EveryNth: {
            const std::uint64_t count = ++call_counts_[fault.id];
            return count % fault.trigger.n == 0;
        }
    }
    throw Error("unreachable trigger kind");
}

namespace {

bool fault_eligible(const FaultSpec& fault, ExecMode mode) {
    switch (mode) {
        case ExecMode::Declared:
            return false;
        case ExecMode::Full:
            return true;
        case ExecMode::ClientUnit:
            return fault.kind == FaultKind::LinkFailure ||
                   fault.kind == FaultKind::InputValidation;
        case ExecMode::MiddlewareUnit:
            return fault.kind == FaultKind::RetrievalError &&
                   fault.subkind == RetrievalSubkind::MiddlewareFunction;
    }
    return false;
}

/// The tier whose walk the fault truncates.
std::string faulting_tier(const FaultSpec& fault) {
    switch (fault.kind) {
        case FaultKind::LinkFailure:
        case FaultKind::InputValidation:
            return "client";
        case FaultKind::RetrievalError:
            return "middleware";
    }
    throw Error("unreachable fault kind");
}

/// The tier label stamped on the surfaced error.
std::string error_tier_label(const FaultSpec& fault, ExecMode mode) {
    switch (fault.kind) {
        case FaultKind::LinkFailure:
            return "client";
        case FaultKind::InputValidation:
            return "client/middleware";
        case FaultKind::RetrievalError:
            return mode == ExecMode::MiddlewareUnit ? "middleware" : "middleware/server";
    }
    throw Error("unreachable fault kind");
}

std::vector<std::string> traversed_tiers(const OperationSpec& op, const SutModel& model,
                                         ExecMode mode) {
    switch (mode) {
        case ExecMode::Full:
        case ExecMode::Declared:
            return op.tiers;
        case ExecMode::ClientUnit:
            return {"client"};
        case ExecMode::MiddlewareUnit:
            return model.has_tier(op, "middleware") ? std::vector<std::string>{"middleware"}
                                                    : std::vector<std::string>{};
    }
    return {};
}

}  // namespace

const FaultSpec* SutSimulator::matching_fault(const OperationSpec& op, const Value& input,
                                              ExecMode mode) {
    for (const auto& fault : model_.faults) {
        if (fault.operation_name != op.name) continue;
        if (!active_.at(fault.id)) continue;
        if (!fault_eligible(fault, mode)) continue;
        if (trigger_fires(fault, input)) return &fault;
    }
    return nullptr;
}

InvokeOutcome SutSimulator::invoke(const std::string& client_id,
                                   const std::string& operation_name, const Value& input,
                                   ExecMode mode) {
    if ((mode == ExecMode::Full || mode == ExecMode::ClientUnit) &&
        model_.find_client(client_id) == nullptr)
        throw UnknownClientError("unknown client '" + client_id + "'");
    const OperationSpec* op = model_.find_operation(operation_name);
    if (op == nullptr) throw UnknownOperationError("unknown operation '" + operation_name + "'");

    InvokeOutcome outcome;
    outcome.cost = op->cost;
    const std::vector<std::string> tiers = traversed_tiers(*op, model_, mode);
    const FaultSpec* fault = mode == ExecMode::Declared ? nullptr
                                                        : matching_fault(*op, input, mode);

    const bool silent_corruption = fault != nullptr &&
                                   fault->kind == FaultKind::RetrievalError &&
                                   fault->subkind == RetrievalSubkind::InconsistentData;

    std::string cut_tier;  // first tier not fully walked ("" = walk everything)
    if (fault != nullptr && !silent_corruption) cut_tier = faulting_tier(*fault);

    for (const auto& walk : op->walks) {
        if (std::find(tiers.begin(), tiers.end(), walk.tier) == tiers.end()) continue;
        ExecutionTrace trace;
        trace.path = walk.path;
        if (walk.tier == cut_tier) {
            const std::size_t keep =
                std::min<std::size_t>(std::max<std::uint32_t>(fault->cut, 1), walk.path.size());
            trace.path.resize(keep);
        }
        outcome.traces.emplace_back(walk.component, std::move(trace));
        if (walk.tier == cut_tier) break;  // later tiers never reached
    }

    if (fault != nullptr && !silent_corruption) {
        outcome.error = TierError{error_tier_label(*fault, mode), fault->defect_type,
                                  fault->context};
        return outcome;
    }

    if (silent_corruption) {
        outcome.output = *fault->corrupt_output;
        return outcome;
    }

    outcome.output = declared_output(model_, *op, input);
    return outcome;
}

void SutSimulator::run_user_session(const std::string& client_id,
                                    const UserSessionScript& script,
                                    const std::string& log_path, bool faults_active) {
    script.validate();
    std::ofstream out(log_path, std::ios::app);
    if (!out) throw Error("cannot open log file for append: " + log_path);
    for (const auto& action : script.actions) {
        LogEntry entry;
        entry.tick = action.tick;
        entry.session = script.session;
        entry.operation_name = action.operation_name;
        entry.input = action.input;
        try {
            InvokeOutcome result = invoke(client_id, action.operation_name, action.input,
                                          faults_active ? ExecMode::Full : ExecMode::Declared);
            if (result.ok()) {
                entry.ok = true;
            } else {
                entry.ok = false;
                entry.defect_type = result.error->defect_type;
                entry.context = result.error->context;
                entry.context["tier"] = result.error->tier;
            }
        } catch (const Error& e) {
            entry.ok = false;
            entry.defect_type = "invocation_error";
            entry.context["note"] = e.what();
        }
        out << log_line(entry) << '\n';
    }
}

}  // namespace triad
