#include "triad/reliability.hpp"

#include <cmath>
#include <string>

namespace triad {

ReliabilityEstimate estimate(const std::vector<Tick>& defect_ticks, Tick run_start, Tick run_end,
                             std::uint32_t intervals) {
    if (intervals == 0) throw InvalidWindowError("reliability: intervals must be positive");
    if (run_end <= run_start)
        throw InvalidWindowError("reliability: run_end must be greater than run_start");

    ReliabilityEstimate out;
    out.intervals = intervals;
    out.defects_per_interval.assign(intervals, 0);

    const Tick span = run_end - run_start;
    for (Tick t : defect_ticks) {
        if (t < run_start || t > run_end)
            throw InvalidWindowError("reliability: defect tick " + std::to_string(t) +
                                     " outside run window [" + std::to_string(run_start) + ", " +
                                     std::to_string(run_end) + "]");
        Tick idx = ((t - run_start) * intervals) / span;
        if (idx >= intervals) idx = intervals - 1;  // t == run_end
        out.defects_per_interval[idx] += 1;
    }

    std::uint64_t total = 0;
    for (auto n : out.defects_per_interval) total += n;
    out.failure_intensity = static_cast<double>(total) / static_cast<double>(intervals);
    out.reliability_one_interval = std::exp(-out.failure_intensity);
    return out;
}

}  // namespace triad
