#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "triad/sut_model.hpp"
#include "triad/user_log.hpp"

namespace triad {

struct UnknownOperationError : Error { using Error::Error; };
struct UnknownClientError : Error { using Error::Error; };
struct UnknownFaultError : Error { using Error::Error; };

/// How much of the stack a call traverses and which faults are eligible:
///   Full: whole tier path, live data, every error fault plus data corruption.
///   ClientUnit: client tier only; link and validation faults; stub data.
///   MiddlewareUnit: middleware tier only; middleware-function faults only;
///                   pristine stub data (so data faults cannot fire).
///   Declared: pure model evaluation, no faults (expected-output derivation).
enum class ExecMode { Full, ClientUnit, MiddlewareUnit, Declared };

std::string_view to_string(ExecMode mode);

/// An error surfaced at a tier (or tier boundary) by a triggered fault.
struct TierError {
    std::string tier;
    std::string defect_type;
    std::map<std::string, std::string> context;

    bool operator==(const TierError&) const = default;
};

struct InvokeOutcome {
    std::optional<Value> output;  // set iff no error
    std::optional<TierError> error;
    std::vector<std::pair<std::string, ExecutionTrace>> traces;  // (component, walk)
    Tick cost{1};

    bool ok() const { return output.has_value(); }
};

struct UserSessionScript {
    std::string session;
    std::uint64_t seed{0};
    struct Action {
        std::string operation_name;
        Value input = Value::object();
        Tick tick{0};

        bool operator==(const Action&) const = default;
    };
    std::vector<Action> actions;  // ticks strictly increasing

    bool operator==(const UserSessionScript&) const = default;

    void validate() const;  // throws ModelError on non-increasing ticks
};

/// Random session over the model's declared operations and example inputs.
UserSessionScript generate_session(const SutModel& model, const std::string& session,
                                   std::uint64_t seed, int action_count, Tick start_tick,
                                   Tick gap = 2);

/// The simulated three-tier system. Deterministic: outcomes depend only on
/// the model, the fault flags, the input, and (for every-nth triggers) the
/// per-fault call counter.
class SutSimulator {
  public:
    explicit SutSimulator(SutModel model);

    const SutModel& model() const { return model_; }

    void set_fault(const std::string& fault_id, bool active);  // UnknownFaultError
    bool fault_active(const std::string& fault_id) const;      // UnknownFaultError

    /// client_id may be empty for MiddlewareUnit and Declared calls.
    InvokeOutcome invoke(const std::string& client_id, const std::string& operation_name,
                         const Value& input, ExecMode mode);

    /// Appends one log line per action to `log_path`. Per-action errors
    /// become Error entries, never exceptions.
    void run_user_session(const std::string& client_id, const UserSessionScript& script,
                          const std::string& log_path, bool faults_active = true);

  private:
    const FaultSpec* matching_fault(const OperationSpec& op, const Value& input, ExecMode mode);
    bool trigger_fires(const FaultSpec& fault, const Value& input);

    SutModel model_;
    std::map<std::string, bool> active_;
    std::map<std::string, std::uint64_t> call_counts_;  // fault id -> eligible calls
};

}  // namespace triad
