#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "triad/core.hpp"

namespace triad {

struct InvalidTraceError : Error { using Error::Error; };

/// Control-flow graph of one component, annotated with the variables each
/// node defines and uses. `entry` has no incoming edges, `exit` no outgoing
/// ones, and every node lies on some entry-to-exit path.
struct ComponentGraph {
    std::string entry;
    std::string exit;
    std::vector<std::string> nodes;
    std::vector<std::pair<std::string, std::string>> edges;
    std::map<std::string, std::set<std::string>> defs;
    std::map<std::string, std::set<std::string>> uses;

    bool operator==(const ComponentGraph&) const = default;

    bool has_node(const std::string& node) const;
    bool has_edge(const std::string& from, const std::string& to) const;
    std::vector<std::string> successors(const std::string& node) const;
    bool node_defines(const std::string& node, const std::string& variable) const;

    /// Structural validation; throws ModelError on violations.
    void validate() const;
};

/// One recorded walk of a component graph. Starts at entry; consecutive
/// elements are edges. It need not reach exit (a faulting run stops early).
struct ExecutionTrace {
    std::string case_id;
    std::vector<std::string> path;

    bool operator==(const ExecutionTrace&) const = default;
};

enum class CoverageCriterion { NodeCoverage, EdgeCoverage, AllDefs, AllUses };

std::string_view to_string(CoverageCriterion criterion);
CoverageCriterion coverage_criterion_from_string(std::string_view text);

struct CoverageSummary {
    CoverageCriterion criterion{CoverageCriterion::NodeCoverage};
    std::uint64_t covered{0};
    std::uint64_t total{0};
    double ratio{1.0};  // covered/total; 1.0 when total == 0 (vacuous)
    std::vector<std::string> uncovered_items;

    bool operator==(const CoverageSummary&) const = default;
};

CoverageSummary make_summary(CoverageCriterion criterion, std::uint64_t covered,
                             std::uint64_t total, std::vector<std::string> uncovered);

///// A def-use pair: `def_node` defines `variable`, `use_node` uses it, and a
/// def-clear simple path connects them (no intermediate node redefines the
/// variable; endpoints may coincide through a cycle).
struct DefUsePair {
    std::string variable;
    std::string def_node;
    std::string use_node;

    auto operator<=>(const DefUsePair&) const = default;
};

/// All def-use pairs of the graph, sorted by (variable, def, use).
std::vector<DefUsePair> feasible_pairs(const ComponentGraph& graph);

/// NodeCoverage or EdgeCoverage over the traces. Throws InvalidTraceError if
/// a trace is not a walk of the graph.
CoverageSummary control_flow_coverage(const ComponentGraph& graph,
                                      const std::vector<ExecutionTrace>& traces,
                                      CoverageCriterion criterion);

/// AllDefs or AllUses over the traces. A pair counts as exercised when some
/// trace contains a def-clear subpath from its def to its use.
CoverageSummary dataflow_coverage(const ComponentGraph& graph,
                                  const std::vector<ExecutionTrace>& traces,
                                  CoverageCriterion criterion);

/// Sums per-component summaries (same criterion) into one, prefixing
/// uncovered items with the component label.
CoverageSummary combine_coverage(const std::vector<std::pair<std::string, CoverageSummary>>& parts);

}  // namespace triad
