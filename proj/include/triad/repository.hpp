#pragma once

#include <map>
#include <string>
#include <vector>

#include "triad/bus.hpp"
#include "triad/core.hpp"
#include "triad/protocol.hpp"
#include "triad/sut_model.hpp"

namespace triad {

struct NoSuiteConfiguredError : Error { using Error::Error; };

/// The repository's persistent state: deduplicated discovered cases, the
/// model-derived initial suites, and the expected-output table keyed by
/// (operation, canonical input bytes).
class SuiteStore {
  public:
    enum class IngestResult { Stored, Discarded };

    SuiteStore() = default;

    /// Derives initial suites and expected outputs from a validated model.
    static SuiteStore from_model(const SutModel& model);

    /// Stores the report's provoking case under its dedup key, attaching an
    /// expected output from the model when the behavior is defined for the
    /// input. Discards exact (defect_type, operation_name) duplicates.
    IngestResult ingest(const DefectReport& report, const SutModel& model);

    /// Serves a suite for the request. Unit/integration/regression: the
    /// initial suite plus matching discovered cases. Stress: the stress base
    /// repeated `volume` times under fresh case ids. Constraint keys:
    /// "operations" (comma-separated filter), "scope" ("middleware" keeps
    /// only middleware-traversing operations), "volume". Throws
    /// NoSuiteConfiguredError when nothing can be served.
    TestSuite select_suite(const SuiteRequest& request, const SutModel& model) const;

    /// Drops discovered cases whose operation the model no longer declares.
    /// Returns the removed case ids, sorted. Idempotent.
    std::vector<std::string> filter_stale(const SutModel& model);

    const std::map<DedupKey, TestCase>& entries() const { return entries_; }
    const std::map<TestingType, TestSuite>& initial_suites() const { return initial_suites_; }
    const std::vector<DefectReport>& stored_reports() const { return stored_reports_; }

    /// Canonical JSON snapshot; from_snapshot(snapshot()) is the identity and
    /// equal stores serialize to identical bytes.
    Json snapshot() const;
    static SuiteStore from_snapshot(const Json& j);

    bool operator==(const SuiteStore&) const = default;

  private:
    std::map<DedupKey, TestCase> entries_;
    std::map<TestingType, TestSuite> initial_suites_;
    std::map<std::pair<std::string, std::string>, ExpectedOutput> expected_;
    std::vector<DefectReport> stored_reports_;
};

/// DRA: owns the SuiteStore, answers SuiteRequests, ingests forwarded cases,
/// and pushes a RepositorySummary report to the tester after every ingest.
class RepositoryAgent final : public Agent {
  public:
    RepositoryAgent(const SutModel& model, AgentId tester);

    AgentId id() const override { return AgentId::dra(); }
    void on_envelope(Bus& bus, const Envelope& envelope) override;

    const SuiteStore& store() const { return store_; }
    SuiteStore& store() { return store_; }

  private:
    void reply(Bus& bus, const Envelope& request, MessageBody body);

    const SutModel& model_;
    AgentId tester_;
    SuiteStore store_;
    std::uint64_t summary_count_{0};
};

}  // namespace triad
