#include <doctest.h>

#include <set>
#include <string>
#include <vector>

#include "model_fixture.hpp"
#include "triad/repository.hpp"

using namespace triad;
using triad::testing::webapp_model;

namespace {

DefectReport sample_report(const std::string& defect_type, const std::string& op,
                           const Json& input, CaseOrigin origin = CaseOrigin::DiscoveredByCca) {
    DefectReport report;
    report.operation_name = op;
    report.defect_type = defect_type;
    report.provoking_case.id = "disc-1";
    report.provoking_case.operation_name = op;
    report.provoking_case.input = input;
    report.provoking_case.defect_type = defect_type;
    report.provoking_case.origin = origin;
    report.discovered_by = AgentId::cca(1);
    report.context = {{"tier", "client"}};
    report.timestamp = 33;
    return report;
}

}  // namespace

TEST_CASE("initial suites are derived from the model") {
    const SutModel model = webapp_model();
    const SuiteStore store = SuiteStore::from_model(model);

    const TestSuite& unit = store.initial_suites().at(TestingType::Unit);
    const TestSuite& integration = store.initial_suites().at(TestingType::Integration);
    const TestSuite& regression = store.initial_suites().at(TestingType::Regression);
    const TestSuite& stress = store.initial_suites().at(TestingType::Stress);

    // One case per operation per example input: 1+1+1+2+2.
    CHECK(unit.cases.size() == 7);
    CHECK(regression.cases.size() == 7);
    // Only operations spanning middleware and server: get_user, order_total.
    CHECK(integration.cases.size() == 4);
    for (const TestCase& c : integration.cases) {
        const OperationSpec* op = model.find_operation(c.operation_name);
        REQUIRE(op != nullptr);
        CHECK(model.has_tier(*op, "middleware"));
        CHECK(model.has_tier(*op, "server"));
    }
    CHECK(stress.cases.size() == 1);
    CHECK(stress.cases[0].operation_name == "order_total");

    std::set<std::string> ids;
    for (const auto& [type, suite] : store.initial_suites())
        for (const TestCase& c : suite.cases) ids.insert(c.id);
    CHECK(ids.size() == 7 + 4 + 7 + 1);  // ids are unique across suites

    // Every initial case carries the declared expected output.
    for (const auto& [type, suite] : store.initial_suites()) {
        for (const TestCase& c : suite.cases) {
            REQUIRE(c.expected_output.has_value());
            const OperationSpec* op = model.find_operation(c.operation_name);
            CHECK(c.expected_output->value == declared_output(model, *op, c.input));
            CHECK(c.origin == CaseOrigin::InitialSuite);
        }
    }
}

TEST_CASE("ingest stores new defect keys and discards duplicates") {
    const SutModel model = webapp_model();
    SuiteStore store = SuiteStore::from_model(model);

    const DefectReport first = sample_report("link_failure", "home_page", Json::object());
    CHECK(store.ingest(first, model) == SuiteStore::IngestResult::Stored);
    CHECK(store.entries().size() == 1);
    CHECK(store.stored_reports().size() == 1);

    // Same key, different provoking input: still a duplicate.
    DefectReport repeat = sample_report("link_failure", "home_page", Json{{"again", true}});
    CHECK(store.ingest(repeat, model) == SuiteStore::IngestResult::Discarded);
    CHECK(store.entries().size() == 1);
    CHECK(store.stored_reports().size() == 1);

    // Same operation under a different defect type is a fresh key.
    const DefectReport other = sample_report("slow_load", "home_page", Json::object());
    CHECK(store.ingest(other, model) == SuiteStore::IngestResult::Stored);
    CHECK(store.entries().size() == 2);

    const TestCase& stored = store.entries().at(DedupKey{"link_failure", "home_page"});
    CHECK(stored.operation_name == "home_page");
    CHECK(stored.defect_type == "link_failure");
    REQUIRE(stored.expected_output.has_value());
    CHECK(stored.expected_output->value ==
          declared_output(model, *model.find_operation("home_page"), Json::object()));
}

TEST_CASE("selected suites include discovered cases for their type") {
    const SutModel model = webapp_model();
    SuiteStore store = SuiteStore::from_model(model);
    store.ingest(sample_report("link_failure", "home_page", Json::object()), model);

    SuiteRequest request;
    request.testing_type = TestingType::Regression;
    const TestSuite suite = store.select_suite(request, model);
    CHECK(suite.testing_type == TestingType::Regression);
    CHECK(suite.cases.size() == 8);  // 7 initial + 1 discovered

    std::size_t discovered = 0;
    for (const TestCase& c : suite.cases)
        if (c.origin == CaseOrigin::DiscoveredByCca) ++discovered;
    CHECK(discovered == 1);
}

TEST_CASE("operations and scope constraints filter the suite") {
    const SutModel model = webapp_model();
    const SuiteStore store = SuiteStore::from_model(model);

    SuiteRequest request;
    request.testing_type = TestingType::Unit;
    request.constraints["operations"] = "get_user,order_total";
    TestSuite suite = store.select_suite(request, model);
    CHECK(suite.cases.size() == 4);
    for (const TestCase& c : suite.cases)
        CHECK((c.operation_name == "get_user" || c.operation_name == "order_total"));

    SuiteRequest scoped;
    scoped.testing_type = TestingType::Unit;
    scoped.constraints["scope"] = "middleware";
    suite = store.select_suite(scoped, model);
    CHECK(suite.cases.size() == 5);  // register_user, get_user x2, order_total x2
    for (const TestCase& c : suite.cases) {
        const OperationSpec* op = model.find_operation(c.operation_name);
        CHECK(model.has_tier(*op, "middleware"));
    }

    SuiteRequest empty;
    empty.testing_type = TestingType::Unit;
    empty.constraints["operations"] = "ghost_op";
    CHECK_THROWS_AS(store.select_suite(empty, model), NoSuiteConfiguredError);
}

TEST_CASE("stress suites repeat the base under fresh ids") {
    const SutModel model = webapp_model();
    const SuiteStore store = SuiteStore::from_model(model);

    SuiteRequest request;
    request.testing_type = TestingType::Stress;
    request.constraints["volume"] = "30";
    const TestSuite suite = store.select_suite(request, model);
    REQUIRE(suite.cases.size() == 30);

    std::set<std::string> ids;
    for (const TestCase& c : suite.cases) {
        CHECK(c.operation_name == "order_total");
        CHECK(c.input == suite.cases[0].input);
        ids.insert(c.id);
    }
    CHECK(ids.size() == 30);

    SuiteRequest unscaled;
    unscaled.testing_type = TestingType::Stress;
    CHECK(store.select_suite(unscaled, model).cases.size() == 1);  // volume defaults to 1
}

TEST_CASE("stale discovered cases are filtered with their reports") {
    const SutModel model = webapp_model();
    SuiteStore store = SuiteStore::from_model(model);
    store.ingest(sample_report("link_failure", "home_page", Json::object()), model);
    store.ingest(sample_report("ghost_defect", "ghost_op", Json::object()), model);
    CHECK(store.entries().size() == 2);

    // ghost_op is not an operation the model declares, so its case is stale.
    const std::vector<std::string> removed = store.filter_stale(model);
    CHECK(removed.size() == 1);
    CHECK(store.entries().size() == 1);
    CHECK(store.entries().count(DedupKey{"link_failure", "home_page"}) == 1);
    CHECK(store.stored_reports().size() == 1);
    CHECK(store.filter_stale(model).empty());  // idempotent
}

TEST_CASE("snapshots round-trip and are byte stable") {
    const SutModel model = webapp_model();
    SuiteStore store = SuiteStore::from_model(model);
    store.ingest(sample_report("link_failure", "home_page", Json::object()), model);
    store.ingest(sample_report("registration_defect", "register_user",
                               Json{{"email", "noatsign"}}),
                 model);

    const Json snap = store.snapshot();
    const SuiteStore restored = SuiteStore::from_snapshot(snap);
    CHECK(restored == store);
    CHECK(restored.snapshot().dump() == snap.dump());
}

TEST_CASE("the repository agent answers requests and reports ingests") {
    const SutModel model = webapp_model();
    SimBus bus;
    RepositoryAgent dra(model, AgentId::tester());

    std::vector<Envelope> tester_mail;
    std::vector<Envelope> mca_mail;
    struct Collector final : Agent {
        AgentId agent_id;
        std::vector<Envelope>* out;
        Collector(AgentId id, std::vector<Envelope>* sink) : agent_id(id), out(sink) {}
        AgentId id() const override { return agent_id; }
        void on_envelope(Bus&, const Envelope& envelope) override { out->push_back(envelope); }
    };
    Collector tester(AgentId::tester(), &tester_mail);
    Collector mca(AgentId::mca(), &mca_mail);
    bus.register_agent(dra);
    bus.register_agent(tester);
    bus.register_agent(mca);

    auto post = [&](MessageBody body) {
        Envelope envelope;
        envelope.header.message_id = bus.next_message_id(mca.id());
        envelope.header.sender = mca.id();
        envelope.header.recipient = dra.id();
        envelope.header.timestamp = bus.now();
        envelope.body = std::move(body);
        bus.send(envelope);
        bus.run_until_quiescent();
    };

    SuiteRequest request;
    request.testing_type = TestingType::Unit;
    post(request);
    REQUIRE(mca_mail.size() == 1);
    const auto* response = std::get_if<SuiteResponse>(&mca_mail[0].body);
    REQUIRE(response != nullptr);
    CHECK(!response->error.has_value());
    CHECK(response->suite.cases.size() == 7);

    TestCaseForward forward;
    forward.report = sample_report("link_failure", "home_page", Json::object());
    post(forward);
    REQUIRE(tester_mail.size() == 1);
    const auto* aggregate = std::get_if<AggregateReport>(&tester_mail[0].body);
    REQUIRE(aggregate != nullptr);
    CHECK(aggregate->report.report_kind == ReportKind::RepositorySummary);
    CHECK(aggregate->report.status == "stored");
    CHECK(aggregate->report.defects.size() == 1);

    post(forward);  // duplicate key
    REQUIRE(tester_mail.size() == 2);
    const auto* dup = std::get_if<AggregateReport>(&tester_mail[1].body);
    REQUIRE(dup != nullptr);
    CHECK(dup->report.status == "discarded_duplicate");
    CHECK(dra.store().entries().size() == 1);

    SuiteRequest impossible;
    impossible.testing_type = TestingType::Unit;
    impossible.constraints["operations"] = "ghost";
    post(impossible);
    REQUIRE(mca_mail.size() == 2);
    const auto* failed = std::get_if<SuiteResponse>(&mca_mail[1].body);
    REQUIRE(failed != nullptr);
    CHECK(failed->error.has_value());
}
