#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "triad/client.hpp"
#include "triad/controller.hpp"
#include "triad/mobile.hpp"
#include "triad/protocol.hpp"
#include "triad/repository.hpp"
#include "triad/scenario.hpp"
#include "triad/sut_model.hpp"
#include "triad/sut_sim.hpp"
#include "triad/tcp_bus.hpp"

namespace {

using namespace triad;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

volatile std::sig_atomic_t g_stop = 0;
void handle_signal(int) { g_stop = 1; }

struct Options {
    std::string model_path;
    std::string scenario_path;
    std::uint64_t seed{1};
    bool seed_set{false};
    std::string out_dir{"runs"};
    std::string mode{"sim"};
    std::string addr;
    std::string listen{"127.0.0.1:0"};
    std::vector<std::string> faults;
    std::vector<std::string> peers;
    std::uint64_t volume{30};
    std::uint64_t intervals{3};
    std::uint64_t deadline{0};
    int timeout_ms{30000};
    std::string fault_id;
    bool fault_off{false};
    std::string op_name;
    std::string input_json{"{}"};
    std::string run_name;
    bool as_json{false};
};

struct Endpoint {
    std::string host;
    std::uint16_t port{0};
};

Endpoint parse_endpoint(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
        throw Error("bad address '" + text + "': want HOST:PORT");
    int port = 0;
    try {
        port = std::stoi(text.substr(colon + 1));
    } catch (const std::exception&) {
        throw Error("bad port in '" + text + "'");
    }
    if (port < 0 || port > 65535) throw Error("bad port in '" + text + "'");
    return {text.substr(0, colon), static_cast<std::uint16_t>(port)};
}

void print_report(const FinalReport& report, bool as_json) {
    if (as_json)
        std::cout << to_json(report).dump() << '\n';
    else
        std::cout << render_report(report);
}

int report_exit(const FinalReport& report) {
    return (report.partial || report.status != "ok") ? kExitFailed : kExitOk;
}

int cmd_run(const Options& opt) {
    ScenarioScript script = ScenarioScript::load(opt.scenario_path);
    if (!opt.model_path.empty()) script.model_path = opt.model_path;
    if (opt.seed_set) script.seed = opt.seed;
    if (opt.mode != "sim") {
        std::cerr << "run: scripted scenarios execute on the simulated bus; "
                     "use --mode=tcp with regress or stress\n";
        return kExitUsage;
    }
    SutModel model = load_sut_model(script.model_path);
    const std::string name = script.name;
    const fs::path dir = fs::path(opt.out_dir) / name;

    ScenarioRunner runner(std::move(script), std::move(model), dir.string());
    const ScenarioResult result = runner.run();

    const auto reports = runner.inbox().reports();
    if (!reports.empty()) print_report(reports.back().second, opt.as_json);
    for (const std::string& failure : result.failures) std::cout << "FAIL " << failure << '\n';
    std::cout << "scenario " << name << ": " << (result.passed ? "pass" : "fail")
              << " (final tick " << result.final_tick << ", artifacts in " << dir.string()
              << ")\n";
    return result.passed ? kExitOk : kExitFailed;
}

TestRequest build_request(TestingType type, const Options& opt) {
    TestRequest request;
    request.testing_type = type;
    if (opt.deadline > 0) request.constraints["deadline"] = std::to_string(opt.deadline);
    if (type == TestingType::Stress) {
        request.constraints["volume"] = std::to_string(opt.volume);
        request.constraints["intervals"] = std::to_string(opt.intervals);
    }
    return request;
}

int exec_sim(TestingType type, const Options& opt) {
    ScenarioScript script;
    script.name = std::string(to_string(type));
    script.model_path = opt.model_path;
    script.seed = opt.seed;

    ScenarioStep start;
    start.tick = 1;
    start.action = "start_agents";
    script.steps.push_back(start);
    for (const std::string& fault : opt.faults) {
        ScenarioStep step;
        step.tick = 1;
        step.action = "set_fault";
        step.args = Json{{"fault", fault}, {"on", true}};
        script.steps.push_back(step);
    }
    ScenarioStep request;
    request.tick = 2;
    request.action = type == TestingType::Stress ? "run_stress" : "request_regression";
    if (opt.deadline > 0) request.args["deadline"] = std::to_string(opt.deadline);
    if (type == TestingType::Stress) {
        request.args["volume"] = std::to_string(opt.volume);
        request.args["intervals"] = std::to_string(opt.intervals);
    }
    script.steps.push_back(request);

    SutModel model = load_sut_model(opt.model_path);
    const fs::path dir = fs::path(opt.out_dir) / script.name;
    ScenarioRunner runner(std::move(script), std::move(model), dir.string());
    runner.run();

    std::optional<FinalReport> got;
    for (const auto& [tick, report] : runner.inbox().reports())
        if (report.report_kind == ReportKind::Run) got = report;
    if (!got) {
        std::cerr << "no report received\n";
        return kExitFailed;
    }
    print_report(*got, opt.as_json);
    return report_exit(*got);
}

int exec_tcp(TestingType type, const Options& opt) {
    if (opt.addr.empty()) {
        std::cerr << "--addr HOST:PORT is required with --mode=tcp\n";
        return kExitUsage;
    }
    const Endpoint peer = parse_endpoint(opt.addr);
    const Endpoint local = parse_endpoint(opt.listen);

    TcpBusConfig config;
    config.listen_host = local.host;
    config.listen_port = local.port;
    config.peers[AgentId::mca()] = peer.host + ":" + std::to_string(peer.port);

    TcpBus bus(config);
    TesterInbox inbox;
    bus.register_agent(inbox);
    bus.start();

    Envelope envelope;
    envelope.header.message_id = bus.next_message_id(inbox.id());
    envelope.header.sender = inbox.id();
    envelope.header.recipient = AgentId::mca();
    envelope.header.timestamp = bus.now();
    envelope.body = build_request(type, opt);
    bus.send(envelope);

    const auto give_up =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(opt.timeout_ms);
    std::optional<FinalReport> got;
    while (!got && std::chrono::steady_clock::now() < give_up) {
        bus.poll();
        for (const auto& [tick, report] : inbox.reports())
            if (report.report_kind == ReportKind::Run) got = report;
        if (!got) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    bus.stop();

    if (!got) {
        std::cerr << "no reply from " << opt.addr << " within " << opt.timeout_ms << "ms\n";
        return kExitFailed;
    }
    print_report(*got, opt.as_json);
    return report_exit(*got);
}

int cmd_exec(TestingType type, const Options& opt) {
    if (opt.mode == "tcp") return exec_tcp(type, opt);
    if (opt.mode == "sim") return exec_sim(type, opt);
    std::cerr << "unknown mode '" << opt.mode << "': want sim or tcp\n";
    return kExitUsage;
}

int cmd_fault(const Options& opt) {
    SutModel model = load_sut_model(opt.model_path);
    SutSimulator sut(model);
    sut.set_fault(opt.fault_id, !opt.fault_off);
    std::cout << "fault " << opt.fault_id << (opt.fault_off ? ": off" : ": on") << '\n';

    if (!opt.op_name.empty()) {
        const Value input = Json::parse(opt.input_json);
        const std::string client = model.clients.empty() ? "" : model.clients.front().id;
        const InvokeOutcome outcome = sut.invoke(client, opt.op_name, input, ExecMode::Full);
        Json line = Json::object();
        line["ok"] = outcome.ok();
        if (outcome.output) line["output"] = *outcome.output;
        if (outcome.error) {
            line["error"] = Json{{"tier", outcome.error->tier},
                                 {"defect_type", outcome.error->defect_type},
                                 {"context", outcome.error->context}};
        }
        std::cout << line.dump() << '\n';
    }
    return kExitOk;
}

int cmd_report(const Options& opt) {
    const fs::path root =
        opt.run_name.empty() ? fs::path(opt.out_dir) : fs::path(opt.out_dir) / opt.run_name;
    std::vector<fs::path> files;
    if (fs::is_directory(root)) {
        for (const auto& entry : fs::recursive_directory_iterator(root)) {
            if (!entry.is_regular_file()) continue;
            const std::string name = entry.path().filename().string();
            if (entry.path().parent_path().filename() == "reports" &&
                name.rfind("report-", 0) == 0 && name.size() > 5 &&
                name.substr(name.size() - 5) == ".json")
                files.push_back(entry.path());
        }
    }
    if (files.empty()) {
        std::cout << "no reports\n";
        return kExitOk;
    }
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        const auto ta = fs::last_write_time(a);
        const auto tb = fs::last_write_time(b);
        return ta != tb ? ta < tb : a.string() < b.string();
    });

    std::ifstream in(files.back(), std::ios::binary);
    Json j = Json::parse(in);
    const FinalReport report = final_report_from_json(j.at("report"));
    print_report(report, opt.as_json);
    return kExitOk;
}

int cmd_serve(const Options& opt) {
    const Endpoint local = parse_endpoint(opt.listen);
    TcpBusConfig config;
    config.listen_host = local.host;
    config.listen_port = local.port;
    for (const std::string& peer : opt.peers) {
        const auto eq = peer.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == peer.size())
            throw Error("bad --peer '" + peer + "': want AGENT=HOST:PORT");
        config.peers[AgentId::parse(peer.substr(0, eq))] = peer.substr(eq + 1);
    }

    SutModel model = load_sut_model(opt.model_path);
    SutSimulator sut(model);
    RepositoryAgent dra(model, AgentId::tester());
    MuaPool pool(sut, static_cast<int>(model.clients.size()));

    fs::create_directories(fs::path(opt.out_dir) / "logs");
    std::vector<std::pair<std::string, AgentId>> registry;
    std::vector<std::unique_ptr<ClientAgent>> ccas;
    int instance = 1;
    for (const ClientSpec& client : model.clients) {
        registry.emplace_back(client.id, AgentId::cca(instance));
        const fs::path log = fs::path(opt.out_dir) / "logs" / (client.id + ".log");
        ccas.push_back(
            std::make_unique<ClientAgent>(instance, client.id, sut, log.string(), AgentId::mca()));
        ++instance;
    }
    ControllerAgent mca(sut, AgentId::dra(), AgentId::tester(), pool, std::move(registry));

    TcpBus bus(config);
    bus.register_agent(dra);
    bus.register_agent(mca);
    for (const auto& cca : ccas) bus.register_agent(*cca);
    bus.start();

    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    std::cout << "listening on " << config.listen_host << ":" << bus.port() << std::endl;
    while (g_stop == 0) {
        bus.poll();
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    bus.stop();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"triad: multi-agent testing of a simulated three-tier system"};
    app.require_subcommand(1);
    Options opt;

    const auto add_common = [&](CLI::App* cmd, bool with_model) {
        if (with_model)
            cmd->add_option("--model", opt.model_path, "system model file")
                ->envname("TRIAD_MODEL")
                ->required();
        cmd->add_option("--seed", opt.seed, "bus scheduling seed")->envname("TRIAD_SEED");
        cmd->add_option("--out", opt.out_dir, "artifact directory root")->envname("TRIAD_OUT");
        cmd->add_flag("--json", opt.as_json, "print the report as canonical JSON");
    };
    const auto add_transport = [&](CLI::App* cmd) {
        cmd->add_option("--mode", opt.mode, "sim or tcp")->envname("TRIAD_MODE");
        cmd->add_option("--addr", opt.addr, "controller address (tcp mode)")
            ->envname("TRIAD_ADDR");
        cmd->add_option("--listen", opt.listen, "local reply endpoint (tcp mode)");
        cmd->add_option("--timeout-ms", opt.timeout_ms, "tcp reply timeout");
        cmd->add_option("--deadline", opt.deadline, "run deadline in ticks");
        cmd->add_option("--fault", opt.faults, "activate a fault before the run (sim mode)");
    };

    CLI::App* run = app.add_subcommand("run", "execute a scripted scenario");
    run->add_option("--scenario", opt.scenario_path, "scenario script file")
        ->envname("TRIAD_SCENARIO")
        ->required();
    run->add_option("--model", opt.model_path, "override the script's model")
        ->envname("TRIAD_MODEL");
    run->add_option("--mode", opt.mode, "sim (scenarios are simulation-only)")
        ->envname("TRIAD_MODE");
    run->add_option("--seed", opt.seed, "override the script's seed")->envname("TRIAD_SEED");
    run->add_option("--out", opt.out_dir, "artifact directory root")->envname("TRIAD_OUT");
    run->add_flag("--json", opt.as_json, "print the final report as canonical JSON");

    CLI::App* regress = app.add_subcommand("regress", "run the regression suite");
    add_common(regress, true);
    add_transport(regress);

    CLI::App* stress = app.add_subcommand("stress", "run the stress suite");
    add_common(stress, true);
    add_transport(stress);
    stress->add_option("--volume", opt.volume, "stress case multiplier");
    stress->add_option("--intervals", opt.intervals, "reliability interval count");

    CLI::App* fault = app.add_subcommand("fault", "toggle a fault and probe its effect");
    fault->add_option("--model", opt.model_path, "system model file")
        ->envname("TRIAD_MODEL")
        ->required();
    fault->add_option("--fault", opt.fault_id, "fault id")->required();
    fault->add_flag("--off", opt.fault_off, "deactivate instead of activate");
    fault->add_option("--op", opt.op_name, "invoke this operation after toggling");
    fault->add_option("--input", opt.input_json, "JSON input for --op");

    CLI::App* report = app.add_subcommand("report", "render the latest stored report");
    report->add_option("--out", opt.out_dir, "artifact directory root")->envname("TRIAD_OUT");
    report->add_option("--run", opt.run_name, "restrict to one run directory");
    report->add_flag("--json", opt.as_json, "print canonical JSON instead of text");

    CLI::App* serve = app.add_subcommand("serve", "host a deployment over tcp");
    serve->add_option("--model", opt.model_path, "system model file")
        ->envname("TRIAD_MODEL")
        ->required();
    serve->add_option("--listen", opt.listen, "bind endpoint HOST:PORT")->required();
    serve->add_option("--peer", opt.peers, "reply route AGENT=HOST:PORT (e.g. TESTER-0=...)");
    serve->add_option("--out", opt.out_dir, "log directory root")->envname("TRIAD_OUT");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    opt.seed_set = run->count("--seed") > 0;

    try {
        if (run->parsed()) return cmd_run(opt);
        if (regress->parsed()) return cmd_exec(TestingType::Regression, opt);
        if (stress->parsed()) return cmd_exec(TestingType::Stress, opt);
        if (fault->parsed()) return cmd_fault(opt);
        if (report->parsed()) return cmd_report(opt);
        if (serve->parsed()) return cmd_serve(opt);
    } catch (const TransportError& e) {
        std::cerr << "transport error: " << e.what() << '\n';
        return kExitFailed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
