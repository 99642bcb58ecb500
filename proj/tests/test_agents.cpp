#include <doctest.h>

#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "model_fixture.hpp"
#include "triad/client.hpp"
#include "triad/controller.hpp"
#include "triad/execution.hpp"
#include "triad/mobile.hpp"
#include "triad/repository.hpp"

using namespace triad;
using triad::testing::scratch_dir;
using triad::testing::webapp_model;

namespace {

class Collector final : public Agent {
  public:
    explicit Collector(AgentId id) : id_(id) {}
    AgentId id() const override { return id_; }
    void on_envelope(Bus& bus, const Envelope& envelope) override {
        (void)bus;
        received.push_back(envelope);
    }

    std::vector<FinalReport> reports(ReportKind kind) const {
        std::vector<FinalReport> out;
        for (const Envelope& e : received)
            if (const auto* aggregate = std::get_if<AggregateReport>(&e.body))
                if (aggregate->report.report_kind == kind) out.push_back(aggregate->report);
        return out;
    }

    std::vector<ResultReport> results() const {
        std::vector<ResultReport> out;
        for (const Envelope& e : received)
            if (const auto* r = std::get_if<ResultReport>(&e.body)) out.push_back(*r);
        return out;
    }

    std::vector<Envelope> received;

  private:
    AgentId id_;
};

Envelope make_envelope(Bus& bus, const AgentId& from, const AgentId& to, MessageBody body) {
    Envelope envelope;
    envelope.header.message_id = bus.next_message_id(from);
    envelope.header.sender = from;
    envelope.header.recipient = to;
    envelope.header.timestamp = bus.now();
    envelope.body = std::move(body);
    return envelope;
}

TestCase ping_case(const std::string& id) {
    TestCase c;
    c.id = id;
    c.operation_name = "ping";
    c.input = Json::object();
    return c;
}

TestSuite ping_suite(const std::string& id, std::size_t count) {
    TestSuite suite;
    suite.id = id;
    suite.testing_type = TestingType::Unit;
    for (std::size_t i = 0; i < count; ++i)
        suite.cases.push_back(ping_case(id + "-" + std::to_string(i)));
    return suite;
}

std::vector<std::pair<std::string, AgentId>> registry_for(const SutModel& model, int count) {
    std::vector<std::pair<std::string, AgentId>> out;
    int instance = 1;
    for (const ClientSpec& client : model.clients) {
        if (instance > count) break;
        out.emplace_back(client.id, AgentId::cca(instance));
        ++instance;
    }
    return out;
}

/// One simulated deployment: DRA, MCA, `cca_count` checkers, a bounded pool,
/// and a tester collector. The registry may list more clients than have live
/// checkers, which models crashed checkers.
struct Deployment {
    SutModel model;
    SimBus bus;
    SutSimulator sut;
    RepositoryAgent dra;
    MuaPool pool;
    ControllerAgent mca;
    Collector tester;
    std::vector<std::unique_ptr<ClientAgent>> ccas;

    Deployment(int cca_count, int pool_capacity, int registry_count, std::uint64_t seed = 21)
        : model(webapp_model()),
          bus(SimBusConfig{.seed = seed}),
          sut(model),
          dra(model, AgentId::tester()),
          pool(sut, pool_capacity),
          mca(sut, AgentId::dra(), AgentId::tester(), pool, registry_for(model, registry_count)),
          tester(AgentId::tester()) {
        const std::string dir = scratch_dir("agents_logs");
        bus.register_agent(dra);
        bus.register_agent(mca);
        bus.register_agent(tester);
        for (int i = 1; i <= cca_count; ++i) {
            ccas.push_back(std::make_unique<ClientAgent>(
                i, model.clients[static_cast<std::size_t>(i - 1)].id, sut,
                dir + "/cca" + std::to_string(i) + ".log", AgentId::mca()));
            bus.register_agent(*ccas.back());
        }
    }

    FinalReport request_and_wait(TestingType type,
                                 std::map<std::string, std::string> constraints = {}) {
        TestRequest request;
        request.testing_type = type;
        request.constraints = std::move(constraints);
        bus.send(make_envelope(bus, tester.id(), AgentId::mca(), std::move(request)));
        bus.run_until_quiescent();
        const auto runs = tester.reports(ReportKind::Run);
        REQUIRE(!runs.empty());
        return runs.back();
    }
};

std::size_t total_results(const FinalReport& report) {
    std::size_t n = 0;
    for (const auto& [agent, results] : report.per_agent_results) n += results.size();
    return n;
}

}  // namespace

TEST_CASE("executing a case compares against the expected output") {
    const SutModel model = webapp_model();
    SutSimulator sut(model);
    const Tick now = 50;

    SUBCASE("clean pass") {
        TestCase c = ping_case("t1");
        c.expected_output = ExpectedOutput{"ping", Json::object(), Json{{"pong", true}}};
        const ExecutedCase done =
            execute_case(sut, "client1", c, ExecMode::Full, AgentId::cca(1), now);
        CHECK(done.result.verdict == Verdict::Pass);
        CHECK(*done.result.observed_output == Json{{"pong", true}});
        CHECK(!done.result.defect.has_value());
        CHECK(done.traces.count("client_ui") == 1);
    }
    SUBCASE("silent mismatch is attributed to the deepest tier") {
        TestCase c;
        c.id = "t2";
        c.operation_name = "get_user";
        c.input = Json{{"id", 2}};
        c.expected_output = ExpectedOutput{"get_user", c.input, Json{{"id", 2}}};
        const ExecutedCase done =
            execute_case(sut, "client1", c, ExecMode::Full, AgentId::cca(1), now);
        CHECK(done.result.verdict == Verdict::Fail);
        REQUIRE(done.result.defect.has_value());
        CHECK(done.result.defect->defect_type == "unexpected_output");
        CHECK(done.result.defect->context.at("tier") == "server");
        CHECK(done.result.defect->discovered_by == AgentId::cca(1));
        CHECK(done.result.defect->timestamp == now);
    }
    SUBCASE("client-tier mismatch points at the client") {
        TestCase c = ping_case("t3");
        c.expected_output = ExpectedOutput{"ping", Json::object(), Json{{"pong", false}}};
        const ExecutedCase done =
            execute_case(sut, "client1", c, ExecMode::Full, AgentId::cca(1), now);
        CHECK(done.result.verdict == Verdict::Fail);
        CHECK(done.result.defect->context.at("tier") == "client");
    }
    SUBCASE("a fault error becomes a full defect report") {
        sut.set_fault("f_link", true);
        TestCase c;
        c.id = "t4";
        c.operation_name = "home_page";
        c.input = Json::object();
        const ExecutedCase done =
            execute_case(sut, "client1", c, ExecMode::Full, AgentId::mua(2), now);
        CHECK(done.result.verdict == Verdict::Fail);
        REQUIRE(done.result.defect.has_value());
        CHECK(done.result.defect->defect_type == "link_failure");
        CHECK(done.result.defect->operation_name == "home_page");
        CHECK(done.result.defect->provoking_case.defect_type == "link_failure");
        CHECK(done.result.defect->discovered_by == AgentId::mua(2));
        CHECK(done.result.defect->context.at("page_name") == "home_page");
        CHECK(done.result.defect->context.at("tier") == "client");
    }
    SUBCASE("an unknown operation is an error verdict, not a crash") {
        TestCase c;
        c.id = "t5";
        c.operation_name = "ghost";
        const ExecutedCase done =
            execute_case(sut, "client1", c, ExecMode::Full, AgentId::cca(1), now);
        CHECK(done.result.verdict == Verdict::Error);
        REQUIRE(done.result.note.has_value());
        CHECK(done.result.note->find("ghost") != std::string::npos);
    }
    SUBCASE("cost follows the operation") {
        TestCase c;
        c.id = "t6";
        c.operation_name = "order_total";
        c.input = Json{{"price", 1}, {"qty", 1}, {"fee", 1}};
        const ExecutedCase done =
            execute_case(sut, "client1", c, ExecMode::Full, AgentId::cca(1), now);
        CHECK(done.cost == 2);
    }
}

TEST_CASE("a misrouted case is rejected without touching the system") {
    SutModel model = webapp_model();
    model.clients[0].operations = {"home_page", "ping"};
    SutSimulator sut(model);
    sut.set_fault("f_surge", true);  // fires on every 5th eligible order_total call

    TestCase c;
    c.id = "m1";
    c.operation_name = "order_total";
    c.input = Json{{"price", 4}, {"qty", 3}, {"fee", 2}};
    for (int i = 0; i < 5; ++i) {
        const ExecutedCase done =
            execute_case(sut, "client1", c, ExecMode::Full, AgentId::cca(1), 1);
        CHECK(done.result.verdict == Verdict::Error);
        REQUIRE(done.result.note.has_value());
        CHECK(done.result.note->find("misrouted") != std::string::npos);
        CHECK(done.traces.empty());
    }
    // Five rejected attempts left the every-nth counter untouched: four clean
    // calls from an unrestricted client are still needed before the fifth fails.
    for (int i = 0; i < 4; ++i)
        CHECK(execute_case(sut, "client2", c, ExecMode::Full, AgentId::cca(2), 1)
                  .result.verdict == Verdict::Pass);
    CHECK(execute_case(sut, "client2", c, ExecMode::Full, AgentId::cca(2), 1)
              .result.verdict == Verdict::Fail);
}

TEST_CASE("log scans are incremental and deduplicate per session") {
    const std::string dir = scratch_dir("agents_scan");
    const std::string path = dir + "/client.log";
    const SutModel model = webapp_model();
    SutSimulator sut(model);
    sut.set_fault("f_link", true);
    sut.set_fault("f_form", true);

    UserSessionScript script;
    script.session = "s";
    script.actions.push_back({"home_page", Json::object(), 1});
    script.actions.push_back({"register_user", Json{{"email", "noatsign"}}, 3});
    script.actions.push_back({"home_page", Json::object(), 5});  // duplicate defect
    script.actions.push_back({"ping", Json::object(), 7});
    sut.run_user_session("client1", script, path);

    SUBCASE("one pass finds each defect key once") {
        MonitorState state;
        const ScanOutcome outcome = scan_log(state, path, AgentId::cca(1));
        CHECK(outcome.scanned == 4);
        REQUIRE(outcome.reports.size() == 2);
        CHECK(outcome.reports[0].defect_type == "link_failure");
        CHECK(outcome.reports[0].operation_name == "home_page");
        CHECK(outcome.reports[0].timestamp == 1);
        CHECK(outcome.reports[1].defect_type == "registration_defect");
        CHECK(outcome.reports[1].discovered_by == AgentId::cca(1));
        CHECK(outcome.reports[1].provoking_case.origin == CaseOrigin::DiscoveredByCca);
    }
    SUBCASE("scanning as the log grows matches one batch scan") {
        MonitorState incremental;
        std::vector<DefectReport> streamed;
        // Scan after every entry was appended, byte region by byte region.
        for (int i = 0; i < 6; ++i) {
            const ScanOutcome outcome = scan_log(incremental, path, AgentId::cca(1));
            for (const DefectReport& r : outcome.reports) streamed.push_back(r);
        }
        MonitorState batch;
        const ScanOutcome whole = scan_log(batch, path, AgentId::cca(1));
        REQUIRE(streamed.size() == whole.reports.size());
        for (std::size_t i = 0; i < streamed.size(); ++i)
            CHECK(streamed[i] == whole.reports[i]);
        CHECK(incremental.byte_offset == batch.byte_offset);
    }
    SUBCASE("a missing file is an empty scan") {
        MonitorState state;
        const ScanOutcome outcome = scan_log(state, dir + "/nope.log", AgentId::cca(1));
        CHECK(outcome.reports.empty());
        CHECK(outcome.scanned == 0);
        CHECK(!outcome.corruption.has_value());
    }
    SUBCASE("mobile discoverers mark their origin") {
        MonitorState state;
        const ScanOutcome outcome = scan_log(state, path, AgentId::mua(1));
        REQUIRE(!outcome.reports.empty());
        CHECK(outcome.reports[0].provoking_case.origin == CaseOrigin::DiscoveredByMua);
    }
}

TEST_CASE("a corrupt log line halts the scan exactly at the damage") {
    const std::string dir = scratch_dir("agents_corrupt");
    const std::string path = dir + "/client.log";
    const SutModel model = webapp_model();
    SutSimulator sut(model);
    sut.set_fault("f_link", true);

    UserSessionScript first;
    first.session = "s";
    first.actions.push_back({"home_page", Json::object(), 1});
    sut.run_user_session("client1", first, path);
    {
        std::ofstream out(path, std::ios::app | std::ios::binary);
        out << "garbage not json\n";
    }

    MonitorState state;
    const ScanOutcome outcome = scan_log(state, path, AgentId::cca(1));
    CHECK(outcome.reports.size() == 1);
    REQUIRE(outcome.corruption.has_value());
    const std::uint64_t stuck_at = state.byte_offset;

    // The cursor does not move past the corruption, and rescans stay put.
    const ScanOutcome again = scan_log(state, path, AgentId::cca(1));
    CHECK(again.reports.empty());
    CHECK(again.corruption.has_value());
    CHECK(state.byte_offset == stuck_at);
    // The already-reported defect key stays deduplicated across scans.
    CHECK(state.reported.count(DedupKey{"link_failure", "home_page"}) == 1);
}

TEST_CASE("a checker runs queued suites in order while answering status") {
    const SutModel model = webapp_model();
    SimBus bus(SimBusConfig{.seed = 31});
    SutSimulator sut(model);
    const std::string dir = scratch_dir("agents_cca");
    ClientAgent cca(1, "client1", sut, dir + "/c1.log", AgentId::mca());
    Collector tester(AgentId::tester());
    Collector mca(AgentId::mca());
    bus.register_agent(cca);
    bus.register_agent(tester);
    bus.register_agent(mca);

    TestRequest first;
    first.testing_type = TestingType::Unit;
    first.suite = ping_suite("first", 30);
    TestRequest second;
    second.testing_type = TestingType::Unit;
    second.suite = ping_suite("second", 2);
    Envelope e1 = make_envelope(bus, tester.id(), cca.id(), first);
    Envelope e2 = make_envelope(bus, tester.id(), cca.id(), second);
    bus.send(e1);
    bus.send(e2);
    // Query while the first suite must still be in progress.
    bus.schedule_action(12, [&] {
        bus.send(make_envelope(bus, tester.id(), cca.id(), StatusQuery{}));
    });
    bus.run_until_quiescent();

    const auto results = tester.results();
    REQUIRE(results.size() == 2);
    CHECK(results[0].results.size() == 30);
    CHECK(results[0].results[0].case_id == "first-0");
    CHECK(results[1].results.size() == 2);
    CHECK(!results[0].partial);
    REQUIRE(results[0].coverage.has_value());
    CHECK(results[0].coverage->ratio > 0.0);

    // Replies carry the request's message id so callers can correlate.
    std::vector<std::string> correlations;
    bool saw_busy_reply = false;
    for (const Envelope& e : tester.received) {
        if (const auto* r = std::get_if<ResultReport>(&e.body)) {
            (void)r;
            REQUIRE(e.header.correlation_id.has_value());
            correlations.push_back(*e.header.correlation_id);
        }
        if (const auto* s = std::get_if<StatusReply>(&e.body)) saw_busy_reply = s->busy;
    }
    CHECK(correlations == std::vector<std::string>{e1.header.message_id, e2.header.message_id});
    CHECK(saw_busy_reply);
}

TEST_CASE("a deadline cuts a client run short with a partial report") {
    const SutModel model = webapp_model();
    SimBus bus(SimBusConfig{.seed = 32});
    SutSimulator sut(model);
    const std::string dir = scratch_dir("agents_deadline");
    ClientAgent cca(1, "client1", sut, dir + "/c1.log", AgentId::mca());
    Collector tester(AgentId::tester());
    Collector mca(AgentId::mca());
    bus.register_agent(cca);
    bus.register_agent(tester);
    bus.register_agent(mca);

    TestRequest request;
    request.testing_type = TestingType::Unit;
    request.suite = ping_suite("huge", 200);
    request.constraints["deadline"] = "15";
    bus.send(make_envelope(bus, tester.id(), cca.id(), request));
    bus.run_until_quiescent();

    const auto results = tester.results();
    REQUIRE(results.size() == 1);
    CHECK(results[0].partial);
    CHECK(results[0].results.size() < 200);
    CHECK(results[0].results.size() > 0);
}

TEST_CASE("the mobile pool bounds reservations and tracks lifecycles") {
    const SutModel model = webapp_model();
    SutSimulator sut(model);
    SimBus bus(SimBusConfig{.seed = 33});
    Collector mca(AgentId::mca());
    bus.register_agent(mca);

    MuaPool pool(sut, 2);
    CHECK(pool.capacity() == 2);
    CHECK(pool.active_count() == 0);
    CHECK_THROWS_AS(pool.reserve("ghost"), UnknownClientError);

    const AgentId first = pool.reserve("client1");
    CHECK(first == AgentId::mua(1));
    CHECK(pool.active_count() == 1);
    const AgentId second = pool.reserve("client2");
    CHECK(second == AgentId::mua(2));
    CHECK_THROWS_AS(pool.reserve("client3"), PoolExhaustedError);

    pool.launch(bus, first);
    pool.launch(bus, second);
    // Retirement order mirrors the real flow: the agent leaves the bus, the
    // controller marks it done, and a later reap frees the object.
    bus.unregister_agent(first);
    pool.mark_done(first);
    CHECK(pool.active_count() == 1);
    pool.reap();
    const AgentId third = pool.reserve("client3");
    CHECK(third == AgentId::mua(3));  // instance numbers are never reused
}

TEST_CASE("a dispatched mobile agent runs one task and retires") {
    const SutModel model = webapp_model();
    SutSimulator sut(model);
    SimBus bus(SimBusConfig{.seed = 34});
    Collector mca(AgentId::mca());
    bus.register_agent(mca);
    MuaPool pool(sut, 1);

    TestRequest task;
    task.testing_type = TestingType::Regression;
    task.suite = ping_suite("mob", 3);
    const AgentId agent = pool.dispatch(bus, mca.id(), "client2", task);
    CHECK(agent == AgentId::mua(1));
    bus.run_until_quiescent();

    const auto results = mca.results();
    REQUIRE(results.size() == 1);
    CHECK(results[0].results.size() == 3);
    CHECK(!results[0].partial);

    // The dispatcher retires the agent once its report arrives.
    CHECK(pool.active_count() == 1);
    pool.mark_done(agent);
    pool.reap();
    CHECK(pool.active_count() == 0);

    // The agent unregistered itself: further mail dead-letters.
    bus.send(make_envelope(bus, mca.id(), agent, StatusQuery{}));
    bus.run_until_quiescent();
    CHECK(!bus.dead_letters().empty());
}

TEST_CASE("a zero deadline expires a mobile task before it runs") {
    const SutModel model = webapp_model();
    SutSimulator sut(model);
    SimBus bus(SimBusConfig{.seed = 35});
    Collector mca(AgentId::mca());
    bus.register_agent(mca);
    MuaPool pool(sut, 1);

    TestRequest task;
    task.testing_type = TestingType::Regression;
    task.suite = ping_suite("doomed", 3);
    task.constraints["deadline"] = "0";
    const AgentId agent = pool.dispatch(bus, mca.id(), "client1", task);
    bus.run_until_quiescent();

    const auto results = mca.results();
    REQUIRE(results.size() == 1);
    CHECK(results[0].partial);
    CHECK(results[0].results.empty());
    pool.mark_done(agent);
    pool.reap();
    CHECK(pool.active_count() == 0);
}

TEST_CASE("unit requests replicate the whole suite on every checker") {
    Deployment deployment(3, 3, 3);
    const FinalReport report = deployment.request_and_wait(TestingType::Unit);

    CHECK(report.status == "ok");
    CHECK(!report.partial);
    CHECK(report.per_agent_results.size() == 3);
    CHECK(report.dispatched_muas.empty());
    for (const auto& [agent, results] : report.per_agent_results)
        CHECK(results.size() == 7);
    REQUIRE(report.coverage.has_value());
    CHECK(report.coverage->ratio == 1.0);
    CHECK(report.defects.empty());
}

TEST_CASE("a silent checker is probed, timed out, and replaced by a mobile agent") {
    // Three clients in the registry, but client3's checker never started.
    Deployment deployment(2, 3, 3);
    const FinalReport report = deployment.request_and_wait(TestingType::Regression);

    CHECK(report.status == "ok");
    CHECK(!report.partial);
    REQUIRE(report.dispatched_muas.size() == 1);
    CHECK(report.dispatched_muas[0] == AgentId::mua(1));
    CHECK(report.per_agent_results.size() == 3);
    CHECK(report.per_agent_results.count(AgentId::mua(1)) == 1);
    CHECK(total_results(report) == 7);

    std::set<std::string> case_ids;
    for (const auto& [agent, results] : report.per_agent_results)
        for (const TestResult& r : results) case_ids.insert(r.case_id);
    CHECK(case_ids.size() == 7);  // exactly-once across the final executors
}

TEST_CASE("an empty pool leaves the silent client uncovered but the run whole") {
    Deployment deployment(2, 0, 3);
    const FinalReport report = deployment.request_and_wait(TestingType::Regression);

    CHECK(report.status == "ok");
    CHECK(report.dispatched_muas.empty());
    CHECK(report.per_agent_results.size() == 2);
    CHECK(total_results(report) == 7);
}

TEST_CASE("no executors at all is reported as no capacity") {
    Deployment deployment(0, 0, 0);
    const FinalReport report = deployment.request_and_wait(TestingType::Unit);

    CHECK(report.status == "no_capacity");
    CHECK(report.per_agent_results.empty());
    CHECK(total_results(report) == 0);
}

TEST_CASE("notices from outside any run raise a monitor alert") {
    Deployment deployment(3, 3, 3);

    DefectNotice notice;
    notice.report.operation_name = "home_page";
    notice.report.defect_type = "link_failure";
    notice.report.provoking_case = ping_case("disc-0");
    notice.report.provoking_case.operation_name = "home_page";
    notice.report.provoking_case.defect_type = "link_failure";
    notice.report.provoking_case.origin = CaseOrigin::DiscoveredByCca;
    notice.report.discovered_by = AgentId::cca(1);
    notice.report.timestamp = 5;
    deployment.bus.send(make_envelope(deployment.bus, AgentId::cca(1), AgentId::mca(),
                                      notice));
    deployment.bus.run_until_quiescent();

    const auto alerts = deployment.tester.reports(ReportKind::MonitorAlert);
    REQUIRE(alerts.size() == 1);
    CHECK(alerts[0].status == "alert");
    REQUIRE(alerts[0].defects.size() == 1);
    CHECK(alerts[0].defects[0].defect_type == "link_failure");

    // The notice still reached the repository.
    const auto summaries = deployment.tester.reports(ReportKind::RepositorySummary);
    REQUIRE(summaries.size() == 1);
    CHECK(summaries[0].status == "stored");
    CHECK(deployment.dra.store().entries().size() == 1);
}

TEST_CASE("discoveries during one run seed the next run's suite") {
    Deployment deployment(3, 3, 3);
    deployment.sut.set_fault("f_link", true);
    const FinalReport faulty = deployment.request_and_wait(TestingType::Regression);
    REQUIRE(faulty.defects.size() == 1);
    CHECK(deployment.dra.store().entries().size() == 1);

    deployment.sut.set_fault("f_link", false);
    const FinalReport rerun = deployment.request_and_wait(TestingType::Regression);
    CHECK(rerun.defects.empty());
    // 7 initial cases plus the stored discovery, split across 3 checkers.
    CHECK(total_results(rerun) == 8);
}
