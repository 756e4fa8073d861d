#include <doctest.h>

#include <cmath>

#include "foclab/errors.hpp"
#include "foclab/quant.hpp"
#include "foclab/rng.hpp"

using namespace foclab;

namespace {

std::vector<std::array<double, 3>> calibration(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::array<double, 3>> out(n);
    for (auto& x : out) {
        x = {rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(-5.0, 5.0)};
    }
    return out;
}

void fit_identity_norm(TinyFCModel& m) {
    m.input_norm = {{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, true};
    m.target_scale = 2.0;
}

// Independent naive int8 interpreter implementing the documented kernel
// contract; must agree with forward_int8 bit for bit.
double reference_int8(const QuantizedModel& q, double wr, double wm, double iq) {
    const double raw[3] = {wr, wm, iq};
    auto quant = [](double v, const ActQuant& a) {
        double code = std::nearbyint(v / a.scale) + a.zero_point;
        if (code < -128) code = -128;
        if (code > 127) code = 127;
        return static_cast<int>(code);
    };
    std::vector<int> input(3);
    for (int i = 0; i < 3; ++i) {
        input[i] = quant((raw[i] - q.input_norm.mean[i]) / q.input_norm.std[i],
                         q.input_q);
    }
    std::vector<int> concat;
    for (const auto& branch : q.branches) {
        std::vector<std::vector<int>> acts;
        acts.push_back(input);
        const ActQuant* cur = &q.input_q;
        for (const auto& layer : branch) {
            std::vector<int> next(layer.spec.out_width);
            const double acc_scale = cur->scale * layer.weights.scale;
            for (int i = 0; i < layer.spec.out_width; ++i) {
                long long acc = layer.bias[i];
                for (int j = 0; j < layer.spec.in_width; ++j) {
                    acc += static_cast<long long>(
                               layer.weights.codes[i * layer.spec.in_width + j]) *
                           (acts.back()[j] - cur->zero_point);
                }
                if (layer.spec.residual_from) {
                    const int src = *layer.spec.residual_from;
                    const ActQuant& rq = src == 0 ? q.input_q : branch[src - 1].out;
                    acc += static_cast<long long>(std::nearbyint(
                        (rq.scale / acc_scale) * (acts[src][i] - rq.zero_point)));
                }
                if (layer.spec.activation == Activation::Relu && acc < 0) acc = 0;
                double code = std::nearbyint(static_cast<double>(acc) *
                                             (acc_scale / layer.out.scale)) +
                              layer.out.zero_point;
                if (code < -128) code = -128;
                if (code > 127) code = 127;
                next[i] = static_cast<int>(code);
            }
            acts.push_back(next);
            cur = &layer.out;
        }
        concat.insert(concat.end(), acts.back().begin(), acts.back().end());
    }
    const ActQuant& cq = q.branches.front().back().out;
    long long acc = q.merge.bias[0];
    for (int j = 0; j < q.merge.spec.in_width; ++j) {
        acc += static_cast<long long>(q.merge.weights.codes[j]) *
               (concat[j] - cq.zero_point);
    }
    return q.target_scale *
           std::tanh(acc * (cq.scale * q.merge.weights.scale));
}

}  // namespace

TEST_CASE("weight quantization rule") {
    TinyFCModel m = build_tinyfc({1, 1, 1, 1, 1}, 3);
    fit_identity_norm(m);
    m.branches[0][0].w = {-1.0, 0.5, 1.0};
    auto q = quantize_int8(m, calibration(64, 1));
    const auto& t = q.branches[0][0].weights;
    CHECK(t.scale == doctest::Approx(1.0 / 127.0).epsilon(1e-15));
    CHECK(t.codes[0] == -127);
    CHECK(t.codes[1] == 64);  // 63.5 rounds half to even
    CHECK(t.codes[2] == 127);
}

TEST_CASE("all-zero tensor quantizes to zero with unit scale") {
    TinyFCModel m = build_tinyfc({2, 2, 2, 2, 2}, 3);
    fit_identity_norm(m);
    auto& l = m.branches[1][2];
    std::fill(l.w.begin(), l.w.end(), 0.0);
    auto q = quantize_int8(m, calibration(64, 1));
    CHECK(q.branches[1][2].weights.scale == 1.0);
    for (auto c : q.branches[1][2].weights.codes) CHECK(c == 0);
}

TEST_CASE("round-trip weight error is at most half a step") {
    TinyFCModel m = build_tinyfc(kDefaultBranchWidths, 17);
    fit_identity_norm(m);
    auto q = quantize_int8(m, calibration(256, 2));
    for (std::size_t b = 0; b < m.branches.size(); ++b) {
        for (std::size_t l = 0; l < m.branches[b].size(); ++l) {
            const auto& fl = m.branches[b][l];
            const auto& ql = q.branches[b][l];
            for (std::size_t i = 0; i < fl.w.size(); ++i) {
                CHECK(std::abs(ql.weights.codes[i] * ql.weights.scale - fl.w[i]) <=
                      ql.weights.scale / 2 + 1e-15);
            }
        }
    }
}

TEST_CASE("zero weights and biases give exactly zero output") {
    TinyFCModel m = build_tinyfc({4, 6, 6, 6, 3}, 3);
    fit_identity_norm(m);
    auto flat = flatten_params(m);
    std::fill(flat.begin(), flat.end(), 0.0);
    unflatten_params(m, flat);
    auto q = quantize_int8(m, calibration(64, 1));
    CHECK(forward_int8(q, 0.0, 0.0, 0.0) == 0.0);
    CHECK(forward_int8(q, 0.7, -0.3, 2.0) == 0.0);
}

TEST_CASE("int8 kernel agrees with the reference interpreter bit for bit") {
    TinyFCModel m = build_tinyfc(kDefaultBranchWidths, 23);
    fit_identity_norm(m);
    auto q = quantize_int8(m, calibration(512, 5));
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
        const double wr = rng.uniform(0.0, 1.0);
        const double wm = rng.uniform(0.0, 1.0);
        const double iq = rng.uniform(-5.0, 5.0);
        const double a = forward_int8(q, wr, wm, iq);
        const double b = reference_int8(q, wr, wm, iq);
        CHECK(a == b);  // bit-exact
    }
}

TEST_CASE("int8 output stays within the declared float error bound") {
    TinyFCModel m = build_tinyfc(kDefaultBranchWidths, 29);
    fit_identity_norm(m);
    auto cal = calibration(1024, 6);
    auto q = quantize_int8(m, cal);
    CHECK(q.float_error_bound > 0.0);
    Rng rng(12);
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
        // inputs inside the calibration box
        const double wr = rng.uniform(0.0, 1.0);
        const double wm = rng.uniform(0.0, 1.0);
        const double iq = rng.uniform(-5.0, 5.0);
        const double diff =
            std::abs(forward_int8(q, wr, wm, iq) - forward(m, wr, wm, iq));
        worst = std::max(worst, diff);
    }
    MESSAGE("max |int8 - float| = ", worst, ", declared bound ",
            q.float_error_bound);
    CHECK(worst <= q.float_error_bound);
}

TEST_CASE("quantize rejects an empty calibration set") {
    TinyFCModel m = build_tinyfc({2, 2, 2, 2, 2}, 3);
    fit_identity_norm(m);
    CHECK_THROWS_AS(quantize_int8(m, {}), DomainError);
}
