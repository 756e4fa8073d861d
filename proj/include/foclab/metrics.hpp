#pragma once

#include <optional>

#include "foclab/trace.hpp"

namespace foclab {

// Control-loop quality numbers in per-unit speed. max_overshoot is empty when
// the trace never settles anywhere (no steady interval), which is reported as
// undefined rather than zero.
struct LoopMetrics {
    double max_deviation = 0.0;
    double avg_deviation = 0.0;
    std::optional<double> max_overshoot;
};

struct MetricsConfig {
    double band = 0.03;          // steady-interval detection band, per-unit
    std::size_t min_len = 150;   // steady-interval minimum length, steps
    double transient_exclusion = 0.010;  // s skipped after each transition

    void validate() const;
};

// max_deviation / avg_deviation over the whole trace. Overshoot is measured
// per constant-reference segment that contains at least one steady interval
// (the reference was actually reached): the largest local maximum of the
// measured speed above the reference, ignoring the transient-exclusion window
// after the transition, clamped at 0. A decaying approach from above has no
// local maximum and therefore no overshoot.
LoopMetrics compute_metrics(const SimTrace& trace, const MetricsConfig& cfg = {});

}  // namespace foclab
