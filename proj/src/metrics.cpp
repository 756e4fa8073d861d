#include "foclab/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "foclab/errors.hpp"
#include "foclab/gt.hpp"

namespace foclab {

void MetricsConfig::validate() const {
    if (!(band > 0.0)) throw ConfigError("metrics: band must be > 0");
    if (min_len == 0) throw ConfigError("metrics: min_len must be >= 1");
    if (transient_exclusion < 0.0) {
        throw ConfigError("metrics: transient_exclusion must be >= 0");
    }
}

LoopMetrics compute_metrics(const SimTrace& trace, const MetricsConfig& cfg) {
    cfg.validate();
    if (trace.empty()) throw DomainError("compute_metrics: empty trace");

    LoopMetrics m;
    double sum = 0.0;
    for (const TraceRow& r : trace.rows) {
        const double dev = std::abs(r.omega_ref - r.omega_meas);
        m.max_deviation = std::max(m.max_deviation, dev);
        sum += dev;
    }
    m.avg_deviation = sum / static_cast<double>(trace.size());

    const auto steady = detect_steady_intervals(trace, cfg.band, cfg.min_len);
    if (steady.empty()) return m;  // overshoot undefined

    const auto& rows = trace.rows;
    const std::size_t n = rows.size();
    const auto excl_steps =
        static_cast<std::size_t>(std::llround(cfg.transient_exclusion / trace.sample_time));

    double overshoot = 0.0;
    std::size_t steady_idx = 0;
    std::size_t seg_start = 0;
    for (std::size_t i = 1; i <= n; ++i) {
        if (i < n && rows[i].omega_ref == rows[seg_start].omega_ref) continue;

        const std::uint64_t lo = rows[seg_start].step;
        const std::uint64_t hi = rows[i - 1].step;
        bool settled = false;
        while (steady_idx < steady.size() && steady[steady_idx].end_step <= hi) {
            if (steady[steady_idx].start_step >= lo) settled = true;
            ++steady_idx;
        }
        if (settled) {
            const double ref = rows[seg_start].omega_ref;
            const std::size_t from =
                std::max(seg_start + excl_steps, seg_start + 1);
            for (std::size_t j = from; j + 1 < i; ++j) {
                const double w = rows[j].omega_meas;
                if (w > ref && w > rows[j - 1].omega_meas &&
                    w >= rows[j + 1].omega_meas) {
                    overshoot = std::max(overshoot, w - ref);
                }
            }
        }
        seg_start = i;
    }
    m.max_overshoot = overshoot;
    return m;
}

}  // namespace foclab
