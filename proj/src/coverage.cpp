#include "triad/coverage.hpp"

#include <algorithm>
#include <deque>

namespace triad {

std::string_view to_string(CoverageCriterion criterion) {
    switch (criterion) {
        case CoverageCriterion::NodeCoverage: return "node";
        case CoverageCriterion::EdgeCoverage: return "edge";
        case CoverageCriterion::AllDefs: return "all_defs";
        case CoverageCriterion::AllUses: return "all_uses";
    }
    throw Error("unknown coverage criterion");
}

CoverageCriterion coverage_criterion_from_string(std::string_view text) {
    if (text == "node") return CoverageCriterion::NodeCoverage;
    if (text == "edge") return CoverageCriterion::EdgeCoverage;
    if (text == "all_defs") return CoverageCriterion::AllDefs;
    if (text == "all_uses") return CoverageCriterion::AllUses;
    throw Error("bad coverage criterion: " + std::string(text));
}

bool ComponentGraph::has_node(const std::string& node) const {
    return std::find(nodes.begin(), nodes.end(), node) != nodes.end();
}

bool ComponentGraph::has_edge(const std::string& from, const std::string& to) const {
    return std::find(edges.begin(), edges.end(), std::pair{from, to}) != edges.end();
}

std::vector<std::string> ComponentGraph::successors(const std::string& node) const {
    std::vector<std::string> out;
    for (const auto& [from, to] : edges) {
        if (from == node) out.push_back(to);
    }
    return out;
}

bool ComponentGraph::node_defines(const std::string& node, const std::string& variable) const {
    auto it = defs.find(node);
    return it != defs.end() && it->second.count(variable) > 0;
}

namespace {

std::set<std::string> reachable_from(const ComponentGraph& g, const std::string& start, bool forward) {
    std::set<std::string> seen{start};
    std::deque<std::string> frontier{start};
    while (!frontier.empty()) {
        auto node = frontier.front();
        frontier.pop_front();
        for (const auto& [from, to] : g.edges) {
            const std::string& next = forward ? to : from;
            const std::string& here = forward ? from : to;
            if (here == node && seen.insert(next).second) frontier.push_back(next);
        }
    }
    return seen;
}

}  // namespace

void ComponentGraph::validate() const {
    std::set<std::string> node_set(nodes.begin(), nodes.end());
    if (node_set.size() != nodes.size()) throw ModelError("graph has duplicate nodes");
    if (!node_set.count(entry)) throw ModelError("graph entry '" + entry + "' is not a node");
    if (!node_set.count(exit)) throw ModelError("graph exit '" + exit + "' is not a node");
    for (const auto& [from, to] : edges) {
        if (!node_set.count(from) || !node_set.count(to)) {
            throw ModelError("graph edge " + from + "->" + to + " references unknown node");
        }
        if (to == entry) throw ModelError("graph entry has incoming edge from " + from);
        if (from == exit) throw ModelError("graph exit has outgoing edge to " + to);
    }
    auto from_entry = reachable_from(*this, entry, true);
    auto to_exit = reachable_from(*this, exit, false);
    for (const auto& node : nodes) {
        if (!from_entry.count(node)) throw ModelError("node " + node + " unreachable from entry");
        if (!to_exit.count(node)) throw ModelError("node " + node + " cannot reach exit");
    }
    for (const auto* annotation : {&defs, &uses}) {
        for (const auto& [node, variables] : *annotation) {
            if (!node_set.count(node)) throw ModelError("def/use annotation on unknown node " + node);
            for (const auto& variable : variables) {
                if (variable.empty()) throw ModelError("empty variable name on node " + node);
            }
        }
    }
}

CoverageSummary make_summary(CoverageCriterion criterion, std::uint64_t covered,
                             std::uint64_t total, std::vector<std::string> uncovered) {
    CoverageSummary summary;
    summary.criterion = criterion;
    summary.covered = covered;
    summary.total = total;
    summary.ratio = total == 0 ? 1.0 : static_cast<double>(covered) / static_cast<double>(total);
    summary.uncovered_items = std::move(uncovered);
    return summary;
}

namespace {

void check_trace(const ComponentGraph& g, const ExecutionTrace& trace) {
    if (trace.path.empty()) throw InvalidTraceError("trace " + trace.case_id + " is empty");
    if (trace.path.front() != g.entry) {
        throw InvalidTraceError("trace " + trace.case_id + " does not start at entry");
    }
    for (std::size_t i = 0; i + 1 < trace.path.size(); ++i) {
        if (!g.has_edge(trace.path[i], trace.path[i + 1])) {
            throw InvalidTraceError("trace " + trace.case_id + " step " + trace.path[i] + "->" +
                                    trace.path[i + 1] + " is not an edge");
        }
    }
}

}  // namespace

CoverageSummary control_flow_coverage(const ComponentGraph& graph,
                                      const std::vector<ExecutionTrace>& traces,
                                      CoverageCriterion criterion) {
    if (criterion != CoverageCriterion::NodeCoverage && criterion != CoverageCriterion::EdgeCoverage) {
        throw Error("control_flow_coverage takes node or edge criterion");
    }
    for (const auto& trace : traces) check_trace(graph, trace);

    if (criterion == CoverageCriterion::NodeCoverage) {
        std::set<std::string> visited;
        for (const auto& trace : traces) visited.insert(trace.path.begin(), trace.path.end());
        std::vector<std::string> uncovered;
        std::vector<std::string> sorted_nodes(graph.nodes.begin(), graph.nodes.end());
        std::sort(sorted_nodes.begin(), sorted_nodes.end());
        for (const auto& node : sorted_nodes) {
            if (!visited.count(node)) uncovered.push_back(node);
        }
        const std::uint64_t covered = graph.nodes.size() - uncovered.size();
        return make_summary(criterion, covered, graph.nodes.size(), std::move(uncovered));
    }

    std::set<std::pair<std::string, std::string>> walked;
    for (const auto& trace : traces) {
        for (std::size_t i = 0; i + 1 < trace.path.size(); ++i) {
            walked.insert({trace.path[i], trace.path[i + 1]});
        }
    }
    std::vector<std::pair<std::string, std::string>> sorted_edges = graph.edges;
    std::sort(sorted_edges.begin(), sorted_edges.end());
    std::vector<std::string> uncovered;
    for (const auto& [from, to] : sorted_edges) {
        if (!walked.count({from, to})) uncovered.push_back(from + "->" + to);
    }
    const std::uint64_t covered = graph.edges.size() - uncovered.size();
    return make_summary(criterion, covered, graph.edges.size(), std::move(uncovered));
}

std::vector<DefUsePair> feasible_pairs(const ComponentGraph& graph) {
    // Def-clear reachability: from a def of v, expand through nodes that do
    // not redefine v. A node using v terminates a pair; a redefining node
    // kills further propagation. The shortest such walk is a simple path,
    // so reachability and simple-path existence agree.
    std::set<DefUsePair> found;
    for (const auto& [def_node, variables] : graph.defs) {
        for (const auto& variable : variables) {
            std::set<std::string> visited;
            std::deque<std::string> frontier;
            for (const auto& succ : graph.successors(def_node)) {
                if (visited.insert(succ).second) frontier.push_back(succ);
            }
            while (!frontier.empty()) {
                auto node = frontier.front();
                frontier.pop_front();
                auto use_it = graph.uses.find(node);
                if (use_it != graph.uses.end() && use_it->second.count(variable)) {
                    found.insert({variable, def_node, node});
                }
                if (graph.node_defines(node, variable)) continue;  // kill
                for (const auto& succ : graph.successors(node)) {
                    if (visited.insert(succ).second) frontier.push_back(succ);
                }
            }
        }
    }
    return {found.begin(), found.end()};
}

namespace {

/// Pairs exercised by the traces: for each use occurrence, the pair with the
/// most recent def of that variable (uses read the incoming value, then the
/// node's own defs take effect).
std::set<DefUsePair> exercised_pairs(const ComponentGraph& graph,
                                     const std::vector<ExecutionTrace>& traces) {
    std::set<DefUsePair> exercised;
    for (const auto& trace : traces) {
        std::map<std::string, std::string> last_def;  // variable -> node
        for (const auto& node : trace.path) {
            auto use_it = graph.uses.find(node);
            if (use_it != graph.uses.end()) {
                for (const auto& variable : use_it->second) {
                    auto def_it = last_def.find(variable);
                    if (def_it != last_def.end()) {
                        exercised.insert({variable, def_it->second, node});
                    }
                }
            }
            auto def_it = graph.defs.find(node);
            if (def_it != graph.defs.end()) {
                for (const auto& variable : def_it->second) last_def[variable] = node;
            }
        }
    }
    return exercised;
}

}  // namespace

CoverageSummary dataflow_coverage(const ComponentGraph& graph,
                                  const std::vector<ExecutionTrace>& traces,
                                  CoverageCriterion criterion) {
    if (criterion != CoverageCriterion::AllDefs && criterion != CoverageCriterion::AllUses) {
        throw Error("dataflow_coverage takes all_defs or all_uses criterion");
    }
    for (const auto& trace : traces) check_trace(graph, trace);

    auto feasible = feasible_pairs(graph);
    auto exercised = exercised_pairs(graph, traces);

    if (criterion == CoverageCriterion::AllUses) {
        std::vector<std::string> uncovered;
        std::uint64_t covered = 0;
        for (const auto& pair : feasible) {
            if (exercised.count(pair)) {
                ++covered;
            } else {
                uncovered.push_back(pair.variable + ":" + pair.def_node + "->" + pair.use_node);
            }
        }
        return make_summary(criterion, covered, feasible.size(), std::move(uncovered));
    }

    // AllDefs: each def site with at least one feasible pair must have some
    // pair exercised.
    std::set<std::pair<std::string, std::string>> sites;      // (variable, def node)
    std::set<std::pair<std::string, std::string>> satisfied;
    for (const auto& pair : feasible) {
        sites.insert({pair.variable, pair.def_node});
        if (exercised.count(pair)) satisfied.insert({pair.variable, pair.def_node});
    }
    std::vector<std::string> uncovered;
    for (const auto& [variable, def_node] : sites) {
        if (!satisfied.count({variable, def_node})) uncovered.push_back(variable + "@" + def_node);
    }
    return make_summary(criterion, satisfied.size(), sites.size(), std::move(uncovered));
}

CoverageSummary combine_coverage(const std::vector<std::pair<std::string, CoverageSummary>>& parts) {
    if (parts.empty()) return make_summary(CoverageCriterion::NodeCoverage, 0, 0, {});
    CoverageCriterion criterion = parts.front().second.criterion;
    std::uint64_t covered = 0;
    std::uint64_t total = 0;
    std::vector<std::string> uncovered;
    for (const auto& [label, summary] : parts) {
        if (summary.criterion != criterion) throw Error("combine_coverage: mixed criteria");
        covered += summary.covered;
        total += summary.total;
        for (const auto& item : summary.uncovered_items) uncovered.push_back(label + ":" + item);
    }
    return make_summary(criterion, covered, total, std::move(uncovered));
}

}  // namespace triad
