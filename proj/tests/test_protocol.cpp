#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "support/proto_gen.hpp"
#include "triad/protocol.hpp"

using namespace triad;
using triad::testing::random_envelope;

namespace {

Envelope status_query_fixture() {
    Envelope env;
    env.header.message_id = "MCA-0:1";
    env.header.sender = AgentId::mca();
    env.header.recipient = AgentId::cca(1);
    env.header.timestamp = 5;
    env.body = StatusQuery{};
    return env;
}

}  // namespace

TEST_CASE("canonical bytes are pinned") {
    CHECK(serialize(status_query_fixture()) ==
          R"({"body":{"kind":"StatusQuery"},"header":)"
          R"({"message_id":"MCA-0:1","recipient":"CCA-1","sender":"MCA-0","timestamp":5}})");
}

TEST_CASE("deserialize undoes serialize for every body kind") {
    std::mt19937 rng(101);
    int seen[10] = {};
    for (int round = 0; round < 500; ++round) {
        Envelope env = random_envelope(rng);
        seen[env.body.index()] += 1;
        std::string bytes = serialize(env);
        Envelope back = deserialize(bytes);
        CHECK(back == env);
        // Round-trip identity on canonical bytes.
        CHECK(serialize(back) == bytes);
    }
    for (int count : seen) CHECK(count > 0);
}

TEST_CASE("serialization ignores map insertion order") {
    // The same envelope written with differently ordered keys: canonical
    // output must be byte-identical. Oracle: sort keys, then compare.
    const std::string shuffled =
        R"({"header":{"timestamp":5,"sender":"MCA-0","recipient":"CCA-1","message_id":"MCA-0:1"},)"
        R"("body":{"kind":"StatusQuery"}})";
    const std::string canonical = serialize(deserialize(shuffled));
    CHECK(canonical == serialize(status_query_fixture()));

    Json sorted_oracle = Json::parse(shuffled);  // std::map storage sorts keys
    CHECK(canonical == sorted_oracle.dump());
}

TEST_CASE("absent optionals leave no placeholders") {
    Envelope env = status_query_fixture();
    std::string bytes = serialize(env);
    CHECK(bytes.find("null") == std::string::npos);
    CHECK(bytes.find("correlation_id") == std::string::npos);

    TestResult result;
    result.case_id = "c1";
    std::string result_bytes = to_json(result).dump();
    CHECK(result_bytes.find("null") == std::string::npos);
    CHECK(result_bytes.find("observed_output") == std::string::npos);
}

TEST_CASE("a test request parses from fixture bytes") {
    const std::string bytes =
        R"({"body":{"constraints":{},"kind":"TestRequest","suite":{"cases":[],"id":"s1",)"
        R"("testing_type":"unit"},"testing_type":"unit"},)"
        R"("header":{"message_id":"TESTER-0:1","recipient":"MCA-0","sender":"TESTER-0",)"
        R"("timestamp":0}})";
    Envelope env = deserialize(bytes);
    const auto* request = std::get_if<TestRequest>(&env.body);
    REQUIRE(request != nullptr);
    CHECK(request->testing_type == TestingType::Unit);
    CHECK(request->suite.id == "s1");
    CHECK(serialize(env) == bytes);
}

TEST_CASE("error taxonomy distinguishes syntax, kind, and schema faults") {
    CHECK_THROWS_AS(deserialize("this is not json"), MalformedMessageError);
    CHECK_THROWS_AS(deserialize(R"({"header":)"), MalformedMessageError);

    const std::string unknown_kind =
        R"({"body":{"kind":"FooBar"},"header":{"message_id":"m","recipient":"MCA-0",)"
        R"("sender":"DRA-0","timestamp":0}})";
    CHECK_THROWS_AS(deserialize(unknown_kind), UnknownBodyKindError);

    // A TestRequest without its suite.
    const std::string missing_suite =
        R"({"body":{"constraints":{},"kind":"TestRequest","testing_type":"unit"},)"
        R"("header":{"message_id":"m","recipient":"MCA-0","sender":"DRA-0","timestamp":0}})";
    CHECK_THROWS_AS(deserialize(missing_suite), SchemaViolationError);

    CHECK_THROWS_AS(deserialize(R"({"body":{"kind":"StatusQuery"}})"), SchemaViolationError);
    CHECK_THROWS_AS(deserialize("[1,2,3]"), SchemaViolationError);

    const std::string bad_timestamp =
        R"({"body":{"kind":"StatusQuery"},"header":{"message_id":"m","recipient":"MCA-0",)"
        R"("sender":"DRA-0","timestamp":"soon"}})";
    CHECK_THROWS_AS(deserialize(bad_timestamp), SchemaViolationError);
}

TEST_CASE("nulls inside values are rejected on both paths") {
    Envelope env = status_query_fixture();
    TestRequest request;
    request.suite.id = "s1";
    TestCase bad;
    bad.id = "c1";
    bad.operation_name = "op";
    bad.input = Json{{"field", nullptr}};
    request.suite.cases.push_back(bad);
    env.body = request;
    CHECK_THROWS_AS(serialize(env), SchemaViolationError);

    const std::string null_input =
        R"({"body":{"constraints":{},"kind":"TestRequest","suite":{"cases":[{"id":"c1",)"
        R"("input":{"field":null},"operation_name":"op","origin":"initial_suite"}],"id":"s1",)"
        R"("testing_type":"unit"},"testing_type":"unit"},)"
        R"("header":{"message_id":"m","recipient":"MCA-0","sender":"DRA-0","timestamp":0}})";
    CHECK_THROWS_AS(deserialize(null_input), SchemaViolationError);
}

TEST_CASE("replies carry the request id as correlation id") {
    Envelope query = status_query_fixture();
    Envelope reply;
    reply.header.message_id = "CCA-1:1";
    reply.header.sender = query.header.recipient;
    reply.header.recipient = query.header.sender;
    reply.header.correlation_id = query.header.message_id;
    reply.header.timestamp = 6;
    reply.body = StatusReply{true};

    Envelope back = deserialize(serialize(reply));
    REQUIRE(back.header.correlation_id.has_value());
    CHECK(*back.header.correlation_id == query.header.message_id);
    CHECK(std::get<StatusReply>(back.body).busy);
}

TEST_CASE("each conversation step maps to exactly one body kind") {
    // One row per exchange in the orchestration conversation.
    TestRequest request;
    SuiteRequest ask;
    SuiteResponse answer;
    ResultReport results;
    DefectNotice notice;
    notice.report.defect_type = "link failure";
    TestCaseForward forward;
    forward.report = notice.report;
    DispatchAgent dispatch;
    AggregateReport final_report;

    const std::vector<std::pair<std::string, MessageBody>> table = {
        {"tester orders a run", request},
        {"controller asks the repository for cases", ask},
        {"repository answers with a suite", answer},
        {"checker returns its results", results},
        {"checker announces a discovered defect", notice},
        {"controller relays the defect for storage", forward},
        {"controller probes whether a checker is busy", StatusQuery{}},
        {"checker answers the probe", StatusReply{false}},
        {"controller sends a mobile stand-in", dispatch},
        {"controller publishes the final report", final_report},
    };

    std::set<std::string> kinds;
    for (const auto& [label, body] : table) {
        CAPTURE(label);
        CHECK(kinds.insert(std::string(body_kind(body))).second);
    }
    CHECK(kinds.size() == std::variant_size_v<MessageBody>);
}
