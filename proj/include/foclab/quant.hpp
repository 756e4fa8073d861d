#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "foclab/loop.hpp"
#include "foclab/tinyfc.hpp"

namespace foclab {

// Symmetric per-tensor weight quantization: scale = max|w| / 127 (1.0 for an
// all-zero tensor), codes = clamp(round_half_even(w / scale), -127, 127).
struct QuantTensor {
    std::vector<std::int8_t> codes;
    double scale = 1.0;
};

// Affine activation quantization calibrated from min/max: real = scale *
// (code - zero_point), with [min, max] mapped onto [-128, 127].
struct ActQuant {
    double scale = 1.0;
    int zero_point = 0;
    double min = 0.0;
    double max = 0.0;
};

struct QuantLayer {
    LayerSpec spec;
    QuantTensor weights;
    std::vector<std::int32_t> bias;  // at scale in_scale * weight_scale
    ActQuant out;                    // post-activation calibration
};

// Integer form of the model. The kernel runs int32 matrix-accumulates with
// requantization between layers; only the final tanh and amp scaling are
// float. float_error_bound is an interval-arithmetic bound (in amps) on
// |forward_int8 - forward| valid for inputs inside the calibration box.
struct QuantizedModel {
    std::string arch_version;
    InputNorm input_norm;
    ActQuant input_q;  // shared by the three normalized input features
    std::vector<std::vector<QuantLayer>> branches;
    QuantLayer merge;  // merge.out is unused; the output stays float
    double target_scale = 1.0;
    std::size_t original_param_count = 0;
    double float_error_bound = 0.0;

    std::size_t weight_count() const;
};

// Post-training quantization against a calibration set, which must cover the
// operating range of every activation.
QuantizedModel quantize_int8(const TinyFCModel& model,
                             const std::vector<std::array<double, 3>>& calibration_inputs);

// Integer inference. Per layer:
//   acc_i  = sum_j W_q[i,j] * (a_q[j] - zp_in)            (int32)
//   acc_i += bias_q[i]
//   acc_i += rhe(res_mult * (r_q[i] - zp_res))            (identity skip)
//   acc_i  = max(acc_i, 0)                                (relu, exact)
//   out_q  = clamp(rhe(acc_i * requant_mult) + zp_out, -128, 127)
// with rhe = round half even and the multipliers derived from the stored
// scales. Accumulators cannot overflow: |acc| <= 255*127*width + |bias| +
// residual term, bounded at quantization time to stay far below 2^31.
double forward_int8(const QuantizedModel& qmodel, double omega_ref,
                    double omega_meas, double iq_pi);
// Same, before scaling by target_scale (in [-1, 1]).
double forward_int8_unit(const QuantizedModel& qmodel, double omega_ref,
                         double omega_meas, double iq_pi);

void attach_augmentor(LoopConfig& cfg, const QuantizedModel& qmodel);

// Round half even of a double, the rounding used throughout the int8 path.
inline double round_half_even(double v) { return std::nearbyint(v); }

}  // namespace foclab
