#pragma once

#include <vector>

#include "triad/coverage.hpp"

namespace triad::testing {

/// Brute-force def-use pair enumeration by exhaustive simple-path search:
/// a pair (v, d, u) is listed iff some path d, y1, ..., u of length >= 1
/// repeats no node (except u == d for cycles) and no intermediate node
/// defines v. Independent of the library's reachability-based implementation.
std::vector<DefUsePair> oracle_feasible_pairs(const ComponentGraph& graph);

}  // namespace triad::testing
