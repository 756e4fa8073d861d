#pragma once

#include <cstdint>

#include "foclab/quant.hpp"
#include "foclab/tinyfc.hpp"

namespace foclab {

// Serialized model header (metadata, shapes, scales) counted on top of the
// raw weight bytes.
inline constexpr std::size_t kModelHeaderBytes = 64;

// Vendor-reported runtime library footprints (flash / RAM); tabulated for
// report parity with typical MCU inference runtimes, not modeled here.
inline constexpr std::size_t kLibFlashFloatBytes = 15 * 1024;
inline constexpr std::size_t kLibFlashInt8Bytes = 32 * 1024;
inline constexpr std::size_t kLibRamFloatBytes = 6 * 1024;
inline constexpr std::size_t kLibRamInt8Bytes = 13 * 1024;

struct LatencyStats {
    double min_us = 0.0;
    double median_us = 0.0;
    double p99_us = 0.0;
    int n_runs = 0;
    int inner_iterations = 1;  // forwards per timing sample (timer batching)
};

struct MemoryEstimate {
    std::size_t weight_bytes = 0;      // parameters + kModelHeaderBytes
    std::size_t activation_bytes = 0;  // peak live intermediate buffers
};

struct CostReport {
    std::size_t macc = 0;
    std::size_t param_count = 0;
    MemoryEstimate memory;
    std::size_t runtime_overhead_bytes = 0;  // library flash
    std::size_t runtime_ram_bytes = 0;       // library RAM
    LatencyStats latency;
};

// Operation count convention (itemized so the total exceeds the raw weight
// count, as MCU toolchains report): per FC layer in*out multiply-accumulates
// plus out bias adds; one add per identity-skip element; one op per
// activation evaluation (identity is free); 3 ops for input normalization and
// 1 for output scaling.
std::size_t count_macc(const TinyFCModel& model);
std::size_t count_macc(const QuantizedModel& model);

// weight_bytes: 4 bytes per parameter (float32 deployment form) or 1 byte
// (int8), plus the header. activation_bytes: peak of live buffer sizes over
// the schedule branch0 -> branch1 -> merge, with buffers freed after their
// last consumer; 4 bytes per element for float, 1 for int8.
MemoryEstimate estimate_memory(const TinyFCModel& model);
MemoryEstimate estimate_memory(const QuantizedModel& model);

// Wall-clock per-inference statistics on a fixed input. Requires n_runs >=
// 100 and performs a warmup; when the timer is too coarse for single runs,
// forwards are batched and inner_iterations reports the batch size.
LatencyStats bench_latency(const TinyFCModel& model, int n_runs);
LatencyStats bench_latency(const QuantizedModel& model, int n_runs);

CostReport make_cost_report(const TinyFCModel& model, int bench_runs = 0);
CostReport make_cost_report(const QuantizedModel& model, int bench_runs = 0);

}  // namespace foclab
