#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "triad/bus.hpp"
#include "triad/client.hpp"
#include "triad/controller.hpp"
#include "triad/mobile.hpp"
#include "triad/protocol.hpp"
#include "triad/repository.hpp"
#include "triad/sut_sim.hpp"

namespace triad {

struct ScenarioError : Error { using Error::Error; };

/// One scripted step, fired at an absolute tick. Actions:
///   start_agents            (documentation marker; agents start registered)
///   set_fault               {fault, on}
///   run_user_session        {client, session | generate:{count, seed}}
///   run_unit                {scope?, clients?, criterion?, suite?, target?, deadline?}
///   run_integration         {clients?, deadline?}
///   request_regression      {clients?, deadline?}
///   run_stress              {volume, intervals, clients?, deadline?}
///   snapshot                {file?}
///   assert_report           {expect:{...}}
struct ScenarioStep {
    Tick tick{1};
    std::string action;
    Json args = Json::object();
};

struct ScenarioScript {
    std::string name;
    std::string model_path;  // relative paths resolve against the script file
    std::uint64_t seed{1};
    int mua_capacity{-1};  // -1: one per client
    std::vector<ScenarioStep> steps;

    static ScenarioScript from_json(const Json& j);
    static ScenarioScript load(const std::string& path);  // resolves model_path
};

struct ScenarioResult {
    bool passed{true};
    std::vector<std::string> failures;
    Tick final_tick{0};
    std::string out_dir;
};

/// Collects everything addressed to TESTER-0, in arrival order.
class TesterInbox final : public Agent {
  public:
    AgentId id() const override { return AgentId::tester(); }
    void on_envelope(Bus& bus, const Envelope& envelope) override;

    const std::vector<std::pair<Tick, Envelope>>& received() const { return received_; }
    std::vector<std::pair<Tick, FinalReport>> reports() const;

  private:
    std::vector<std::pair<Tick, Envelope>> received_;
};

/// Runs a script on a fresh simulated deployment (DRA, MCA, one CCA per
/// client, MUA pool, tester inbox) and writes the run artifacts:
///   trace.jsonl   every delivered envelope
///   logs/         per-client user logs
///   reports/      tester-received reports, arrival order
///   store.json    repository snapshot
///   result.json   assertion outcome
/// Output bytes are a pure function of script + model (no wall clock, no
/// absolute paths), so identical runs produce identical directories.
class ScenarioRunner {
  public:
    ScenarioRunner(ScenarioScript script, SutModel model, std::string out_dir);

    ScenarioResult run();

    SimBus& bus() { return bus_; }
    SutSimulator& sut() { return sut_; }
    const TesterInbox& inbox() const { return tester_; }
    const SuiteStore& store() const { return dra_.store(); }
    const std::vector<std::unique_ptr<ClientAgent>>& checkers() const { return ccas_; }

  private:
    void execute_step(const ScenarioStep& step);
    void send_request(TestingType type, const Json& args);
    std::vector<std::string> evaluate(const Json& expect) const;
    std::string log_path(const std::string& client_id) const;
    void write_outputs(const ScenarioResult& result) const;

    ScenarioScript script_;
    SutModel model_;
    std::string out_dir_;
    SutSimulator sut_;
    SimBus bus_;
    TesterInbox tester_;
    RepositoryAgent dra_;
    MuaPool pool_;
    ControllerAgent mca_;
    std::vector<std::unique_ptr<ClientAgent>> ccas_;
    std::vector<std::string> failures_;
};

/// Writes `report` as wrapped text lines (status, defects, coverage,
/// reliability) for CLI consumption.
std::string render_report(const FinalReport& report);

}  // namespace triad
