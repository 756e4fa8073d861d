#include "foclab/cost.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <cmath>
#include <vector>

#include "foclab/errors.hpp"

namespace foclab {

namespace {

std::size_t macc_for_layer(const LayerSpec& s) {
    std::size_t ops = static_cast<std::size_t>(s.in_width) * s.out_width;  // MACs
    ops += s.out_width;                                                    // bias adds
    if (s.residual_from) ops += s.out_width;                               // skip adds
    if (s.activation != Activation::Identity) ops += s.out_width;          // act evals
    return ops;
}

template <class Branches, class MergeLayer>
std::size_t macc_walk(const Branches& branches, const MergeLayer& merge) {
    std::size_t total = kTinyFCInputs + 1;  // input normalization + output scale
    for (const auto& br : branches)
        for (const auto& l : br) total += macc_for_layer(l.spec);
    total += macc_for_layer(merge.spec);
    return total;
}

// Peak live buffer elements over the fixed schedule: branch 0 layers, branch
// 1 layers, merge. A buffer dies after its last consumer runs.
template <class Branches>
std::size_t peak_activation_elems(const Branches& branches, int input_width) {
    struct Buffer {
        std::size_t elems;
        int last_use;  // op index of the final consumer
    };
    std::vector<Buffer> buffers;
    // op indices: per branch one op per layer, then the merge op
    int op = 0;
    int merge_op = 0;
    for (const auto& br : branches) merge_op += static_cast<int>(br.size());

    buffers.push_back({static_cast<std::size_t>(input_width), 0});
    std::vector<std::vector<int>> act_buffer_of(branches.size());

    // input is read by the first layer of every branch
    int first_op_of_branch = 0;
    for (const auto& br : branches) {
        buffers[0].last_use = std::max(buffers[0].last_use, first_op_of_branch);
        first_op_of_branch += static_cast<int>(br.size());
    }

    op = 0;
    for (std::size_t b = 0; b < branches.size(); ++b) {
        act_buffer_of[b].assign(branches[b].size() + 1, -1);
        act_buffer_of[b][0] = 0;
        for (std::size_t l = 0; l < branches[b].size(); ++l, ++op) {
            const auto& spec = branches[b][l].spec;
            // inputs of this op stay live through it
            buffers[act_buffer_of[b][l]].last_use =
                std::max(buffers[act_buffer_of[b][l]].last_use, op);
            if (spec.residual_from) {
                const int src = act_buffer_of[b][*spec.residual_from];
                buffers[src].last_use = std::max(buffers[src].last_use, op);
            }
            buffers.push_back({static_cast<std::size_t>(spec.out_width), op});
            act_buffer_of[b][l + 1] = static_cast<int>(buffers.size()) - 1;
        }
        // branch output feeds the merge
        buffers[act_buffer_of[b].back()].last_use = merge_op;
    }

    // allocation op of buffer i: 0 for the input (pre-existing), otherwise
    // the op that writes it (buffers were appended in op order)
    std::vector<int> alloc_op(buffers.size(), 0);
    {
        int cur = 0;
        std::size_t idx = 1;
        for (std::size_t b = 0; b < branches.size(); ++b) {
            for (std::size_t l = 0; l < branches[b].size(); ++l, ++cur) {
                alloc_op[idx++] = cur;
            }
        }
    }

    std::size_t peak = 0;
    for (int o = 0; o <= merge_op; ++o) {
        std::size_t live = o == merge_op ? 1 : 0;  // merge output scalar
        for (std::size_t i = 0; i < buffers.size(); ++i) {
            if (alloc_op[i] <= o && buffers[i].last_use >= o) live += buffers[i].elems;
        }
        peak = std::max(peak, live);
    }
    return peak;
}

LatencyStats bench(const std::function<void()>& run_once, int n_runs) {
    if (n_runs < 100) throw DomainError("bench_latency: n_runs must be >= 100");
    using clock = std::chrono::steady_clock;

    // warmup
    for (int i = 0; i < std::max(10, n_runs / 10); ++i) run_once();

    // pick an inner batch so one sample spans well above timer resolution
    int inner = 1;
    for (;;) {
        const auto t0 = clock::now();
        for (int i = 0; i < inner; ++i) run_once();
        const auto dt = std::chrono::duration_cast<std::chrono::nanoseconds>(
                            clock::now() - t0)
                            .count();
        if (dt >= 20000 || inner >= 1 << 20) break;
        inner *= 2;
    }

    std::vector<double> samples(n_runs);
    for (int s = 0; s < n_runs; ++s) {
        const auto t0 = clock::now();
        for (int i = 0; i < inner; ++i) run_once();
        const auto dt = std::chrono::duration_cast<std::chrono::nanoseconds>(
                            clock::now() - t0)
                            .count();
        samples[s] = static_cast<double>(dt) / (1000.0 * inner);  // us per run
    }
    std::sort(samples.begin(), samples.end());
    LatencyStats st;
    st.n_runs = n_runs;
    st.inner_iterations = inner;
    st.min_us = samples.front();
    st.median_us = samples[n_runs / 2];
    st.p99_us = samples[std::min<std::size_t>(samples.size() - 1,
                                              (samples.size() * 99) / 100)];
    return st;
}

}  // namespace

std::size_t count_macc(const TinyFCModel& model) {
    return macc_walk(model.branches, model.merge);
}

std::size_t count_macc(const QuantizedModel& model) {
    return macc_walk(model.branches, model.merge);
}

MemoryEstimate estimate_memory(const TinyFCModel& model) {
    MemoryEstimate m;
    m.weight_bytes = model.param_count() * 4 + kModelHeaderBytes;
    m.activation_bytes =
        peak_activation_elems(model.branches, kTinyFCInputs) * 4;
    return m;
}

MemoryEstimate estimate_memory(const QuantizedModel& model) {
    MemoryEstimate m;
    m.weight_bytes = model.weight_count() * 1 + kModelHeaderBytes;
    m.activation_bytes = peak_activation_elems(model.branches, kTinyFCInputs) * 1;
    return m;
}

LatencyStats bench_latency(const TinyFCModel& model, int n_runs) {
    if (!model.input_norm.fitted) throw StateError("bench_latency: unfitted model");
    volatile double sink = 0.0;
    return bench(
        [&] { sink = forward(model, 0.5, 0.45, 1.0); }, n_runs);
}

LatencyStats bench_latency(const QuantizedModel& model, int n_runs) {
    volatile double sink = 0.0;
    return bench(
        [&] { sink = forward_int8(model, 0.5, 0.45, 1.0); }, n_runs);
}

CostReport make_cost_report(const TinyFCModel& model, int bench_runs) {
    CostReport r;
    r.macc = count_macc(model);
    r.param_count = model.param_count();
    r.memory = estimate_memory(model);
    r.runtime_overhead_bytes = kLibFlashFloatBytes;
    r.runtime_ram_bytes = kLibRamFloatBytes;
    if (bench_runs > 0) r.latency = bench_latency(model, bench_runs);
    return r;
}

CostReport make_cost_report(const QuantizedModel& model, int bench_runs) {
    CostReport r;
    r.macc = count_macc(model);
    r.param_count = model.weight_count();
    r.memory = estimate_memory(model);
    r.runtime_overhead_bytes = kLibFlashInt8Bytes;
    r.runtime_ram_bytes = kLibRamInt8Bytes;
    if (bench_runs > 0) r.latency = bench_latency(model, bench_runs);
    return r;
}

}  // namespace foclab
