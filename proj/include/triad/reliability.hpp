#pragma once

#include <vector>

#include "triad/core.hpp"

namespace triad {

struct InvalidWindowError : Error { using Error::Error; };

struct ReliabilityEstimate {
    std::uint32_t intervals{1};
    std::vector<std::uint64_t> defects_per_interval;
    double failure_intensity{0.0};        // mean defects per interval
    double reliability_one_interval{1.0};  // exp(-failure_intensity)

    bool operator==(const ReliabilityEstimate&) const = default;
};

/// Partitions [run_start, run_end) into `intervals` equal half-open windows
/// (the last closed at run_end), counts defects per window, and derives the
/// failure intensity and the single-interval reliability. A tick on a window
/// boundary belongs to the later window.
ReliabilityEstimate estimate(const std::vector<Tick>& defect_ticks, Tick run_start, Tick run_end,
                             std::uint32_t intervals);

}  // namespace triad
