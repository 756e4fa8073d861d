#include "foclab/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "foclab/errors.hpp"

namespace foclab {

namespace {

std::int8_t clamp_i8(double v) {
    return static_cast<std::int8_t>(std::clamp(v, -128.0, 127.0));
}

QuantTensor quantize_weights(const std::vector<double>& w) {
    QuantTensor q;
    double peak = 0.0;
    for (double v : w) peak = std::max(peak, std::abs(v));
    q.scale = peak > 0.0 ? peak / 127.0 : 1.0;
    q.codes.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        q.codes[i] = static_cast<std::int8_t>(
            std::clamp(round_half_even(w[i] / q.scale), -127.0, 127.0));
    }
    return q;
}

ActQuant calibrate(double mn, double mx) {
    ActQuant a;
    a.min = mn;
    a.max = mx;
    a.scale = mx > mn ? (mx - mn) / 255.0 : 1.0;
    a.zero_point = static_cast<int>(
        std::clamp(round_half_even(-128.0 - mn / a.scale), -128.0, 127.0));
    return a;
}

int quantize_act(double v, const ActQuant& a) {
    return static_cast<int>(
        std::clamp(round_half_even(v / a.scale) + a.zero_point, -128.0, 127.0));
}

struct Interval {
    double lo = 0.0, hi = 0.0;
};

}  // namespace

std::size_t QuantizedModel::weight_count() const {
    std::size_t n = merge.weights.codes.size() + merge.bias.size();
    for (const auto& br : branches)
        for (const auto& l : br) n += l.weights.codes.size() + l.bias.size();
    return n;
}

QuantizedModel quantize_int8(const TinyFCModel& model,
                             const std::vector<std::array<double, 3>>& calibration_inputs) {
    model.validate();
    if (calibration_inputs.empty()) {
        throw DomainError("quantize: calibration set is empty");
    }

    const auto acts = collect_activations(model, calibration_inputs);
    const auto n = calibration_inputs.size();

    QuantizedModel q;
    q.arch_version = model.arch_version;
    q.input_norm = model.input_norm;
    q.target_scale = model.target_scale;
    q.original_param_count = model.param_count();

    auto tensor_range = [&](std::size_t b, std::size_t k) {
        double mn = std::numeric_limits<double>::infinity();
        double mx = -mn;
        for (double v : acts[b][k]) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        return std::pair{mn, mx};
    };

    // one shared calibration for the three normalized input features
    {
        double mn = std::numeric_limits<double>::infinity(), mx = -mn;
        for (std::size_t b = 0; b < 1; ++b) {
            auto [lo, hi] = tensor_range(0, 0);
            mn = std::min(mn, lo);
            mx = std::max(mx, hi);
        }
        q.input_q = calibrate(mn, mx);
    }

    // merge input: both branch outputs share one calibration
    double cat_mn = std::numeric_limits<double>::infinity(), cat_mx = -cat_mn;
    for (std::size_t b = 0; b < model.branches.size(); ++b) {
        auto [lo, hi] = tensor_range(b, model.branches[b].size());
        cat_mn = std::min(cat_mn, lo);
        cat_mx = std::max(cat_mx, hi);
    }
    const ActQuant cat_q = calibrate(cat_mn, cat_mx);

    for (std::size_t b = 0; b < model.branches.size(); ++b) {
        std::vector<QuantLayer> qbr;
        const ActQuant* in_q = &q.input_q;
        for (std::size_t l = 0; l < model.branches[b].size(); ++l) {
            const Layer& layer = model.branches[b][l];
            QuantLayer ql;
            ql.spec = layer.spec;
            ql.weights = quantize_weights(layer.w);
            const double acc_scale = in_q->scale * ql.weights.scale;
            ql.bias.resize(layer.b.size());
            for (std::size_t i = 0; i < layer.b.size(); ++i) {
                ql.bias[i] =
                    static_cast<std::int32_t>(round_half_even(layer.b[i] / acc_scale));
            }
            if (l + 1 == model.branches[b].size()) {
                ql.out = cat_q;
            } else {
                auto [lo, hi] = tensor_range(b, l + 1);
                ql.out = calibrate(lo, hi);
            }
            qbr.push_back(std::move(ql));
            in_q = &qbr.back().out;
        }
        q.branches.push_back(std::move(qbr));
    }

    {
        QuantLayer qm;
        qm.spec = model.merge.spec;
        qm.weights = quantize_weights(model.merge.w);
        const double acc_scale = cat_q.scale * qm.weights.scale;
        qm.bias.resize(model.merge.b.size());
        for (std::size_t i = 0; i < model.merge.b.size(); ++i) {
            qm.bias[i] = static_cast<std::int32_t>(
                round_half_even(model.merge.b[i] / acc_scale));
        }
        q.merge = std::move(qm);
    }

    // Overflow guard for the documented int32 accumulator bound:
    // 255 * 127 * width + |bias| + residual rescale, all far below 2^31.
    for (const auto& br : q.branches) {
        for (const auto& l : br) {
            double bound = 255.0 * 127.0 * l.spec.in_width + 255.0 * 127.0;
            for (std::int32_t bias : l.bias) bound += std::abs(static_cast<double>(bias));
            if (bound >= 1e9) throw ConfigError("quantize: accumulator bound too large");
        }
    }

    // ---- declared error bound: interval arithmetic from the calibration box
    // through the float weights, accumulating quantization error per layer.
    {
        // input features after normalization, bounded by the calibration box
        std::vector<Interval> in_iv(kTinyFCInputs);
        {
            auto [lo, hi] = tensor_range(0, 0);
            for (int i = 0; i < kTinyFCInputs; ++i) in_iv[i] = {lo, hi};
        }
        const double e_in = 0.5 * q.input_q.scale;

        double cat_err = 0.0;
        std::vector<Interval> cat_iv;
        for (std::size_t b = 0; b < model.branches.size(); ++b) {
            std::vector<Interval> iv = in_iv;
            std::vector<std::vector<Interval>> history{iv};
            std::vector<double> err_history{e_in};
            double err = e_in;
            for (std::size_t l = 0; l < model.branches[b].size(); ++l) {
                const Layer& layer = model.branches[b][l];
                const QuantLayer& ql = q.branches[b][l];
                const double sw = ql.weights.scale;
                std::vector<Interval> ziv(layer.spec.out_width);
                double worst = 0.0;
                for (int i = 0; i < layer.spec.out_width; ++i) {
                    double lo = layer.b[i], hi = layer.b[i];
                    double e = 0.0;
                    for (int j = 0; j < layer.spec.in_width; ++j) {
                        const double w = layer.w[i * layer.spec.in_width + j];
                        const double wq = ql.weights.codes[i * layer.spec.in_width + j] * sw;
                        const Interval& x = iv[j];
                        lo += std::min(w * x.lo, w * x.hi);
                        hi += std::max(w * x.lo, w * x.hi);
                        const double amax = std::max(std::abs(x.lo), std::abs(x.hi));
                        e += std::abs(wq - w) * amax + std::abs(wq) * err;
                    }
                    // bias rounding + residual rescale rounding
                    const double acc_scale =
                        (l == 0 ? q.input_q.scale : q.branches[b][l - 1].out.scale) * sw;
                    e += 0.5 * acc_scale;
                    if (layer.spec.residual_from) {
                        const int src = *layer.spec.residual_from;
                        const Interval& rx = history[src][i];
                        lo += rx.lo;
                        hi += rx.hi;
                        e += err_history[src] + 0.5 * acc_scale;
                    }
                    ziv[i] = {lo, hi};
                    worst = std::max(worst, e);
                }
                // relu is 1-Lipschitz; requantization adds half a step plus
                // clipping excess outside the calibrated range
                double clip = 0.0;
                double cap = 0.0;
                for (auto& v : ziv) {
                    if (layer.spec.activation == Activation::Relu) {
                        v.lo = std::max(v.lo, 0.0);
                        v.hi = std::max(v.hi, 0.0);
                    }
                    clip = std::max({clip, ql.out.min - v.lo, v.hi - ql.out.max, 0.0});
                    // dequantized codes live in [out.min, out.max], the float
                    // value in [v.lo, v.hi]; their gap cannot exceed this
                    cap = std::max({cap, ql.out.max - v.lo, v.hi - ql.out.min});
                }
                err = std::min(worst + 0.5 * ql.out.scale + clip, cap);
                iv = ziv;
                history.push_back(iv);
                err_history.push_back(err);
            }
            cat_err = std::max(cat_err, err);
            cat_iv.insert(cat_iv.end(), iv.begin(), iv.end());
        }
        // merge: accumulate, then |tanh(a) - tanh(b)| <= |a - b|
        double e = 0.0;
        const double swm = q.merge.weights.scale;
        for (int j = 0; j < model.merge.spec.in_width; ++j) {
            const double w = model.merge.w[j];
            const double wq = q.merge.weights.codes[j] * swm;
            const Interval& x = cat_iv[j];
            const double amax = std::max(std::abs(x.lo), std::abs(x.hi));
            e += std::abs(wq - w) * amax + std::abs(wq) * cat_err;
        }
        e += 0.5 * cat_q.scale * swm;  // bias rounding
        q.float_error_bound = q.target_scale * e;
    }

    return q;
}

namespace {

// Integer forward pass shared by the amp and unit entry points.
double int8_merge_preact(const QuantizedModel& q, double omega_ref,
                         double omega_meas, double iq_pi) {
    if (!q.input_norm.fitted) throw StateError("forward_int8: unfitted normalization");
    const double raw[3] = {omega_ref, omega_meas, iq_pi};
    std::vector<int> in_codes(kTinyFCInputs);
    for (int i = 0; i < kTinyFCInputs; ++i) {
        const double xn = (raw[i] - q.input_norm.mean[i]) / q.input_norm.std[i];
        in_codes[i] = quantize_act(xn, q.input_q);
    }

    std::vector<int> cat;
    for (const auto& branch : q.branches) {
        std::vector<std::vector<int>> codes{in_codes};
        const ActQuant* in_q = &q.input_q;
        for (const auto& layer : branch) {
            const int ni = layer.spec.in_width;
            const int no = layer.spec.out_width;
            const double acc_scale = in_q->scale * layer.weights.scale;
            std::vector<int> out(no);
            const std::vector<int>& a = codes.back();
            for (int i = 0; i < no; ++i) {
                std::int32_t acc = layer.bias[i];
                const std::int8_t* wr = layer.weights.codes.data() +
                                        static_cast<std::size_t>(i) * ni;
                for (int j = 0; j < ni; ++j) {
                    acc += static_cast<std::int32_t>(wr[j]) *
                           (a[j] - in_q->zero_point);
                }
                if (layer.spec.residual_from) {
                    const int src = *layer.spec.residual_from;
                    const ActQuant& rq =
                        src == 0 ? q.input_q : branch[src - 1].out;
                    const double res_mult = rq.scale / acc_scale;
                    acc += static_cast<std::int32_t>(round_half_even(
                        res_mult * (codes[src][i] - rq.zero_point)));
                }
                if (layer.spec.activation == Activation::Relu) {
                    acc = std::max(acc, 0);
                }
                const double requant_mult = acc_scale / layer.out.scale;
                out[i] = static_cast<int>(
                    std::clamp(round_half_even(acc * requant_mult) +
                                   layer.out.zero_point,
                               -128.0, 127.0));
            }
            codes.push_back(std::move(out));
            in_q = &layer.out;
        }
        cat.insert(cat.end(), codes.back().begin(), codes.back().end());
    }

    const ActQuant& cat_q = q.branches.front().back().out;
    std::int32_t acc = q.merge.bias[0];
    for (int j = 0; j < q.merge.spec.in_width; ++j) {
        acc += static_cast<std::int32_t>(q.merge.weights.codes[j]) *
               (cat[j] - cat_q.zero_point);
    }
    return acc * (cat_q.scale * q.merge.weights.scale);
}

}  // namespace

double forward_int8_unit(const QuantizedModel& qmodel, double omega_ref,
                         double omega_meas, double iq_pi) {
    return std::tanh(int8_merge_preact(qmodel, omega_ref, omega_meas, iq_pi));
}

double forward_int8(const QuantizedModel& qmodel, double omega_ref,
                    double omega_meas, double iq_pi) {
    return qmodel.target_scale *
           forward_int8_unit(qmodel, omega_ref, omega_meas, iq_pi);
}

void attach_augmentor(LoopConfig& cfg, const QuantizedModel& qmodel) {
    cfg.augmentor = [qmodel](double omega_ref, double omega_meas, double iq_pi) {
        return forward_int8_unit(qmodel, omega_ref, omega_meas, iq_pi);
    };
    cfg.augment_scale = qmodel.target_scale;
}

}  // namespace foclab
