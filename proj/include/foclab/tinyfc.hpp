#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "foclab/gt.hpp"
#include "foclab/loop.hpp"

namespace foclab {

enum class Activation { Identity, Relu, Tanh };

// One fully connected layer. Layers are indexed per branch: activation 0 is
// the branch input, activation k the output of layer k. residual_from names
// an earlier activation that is added to the pre-activation (identity skip),
// so the source width must equal out_width.
struct LayerSpec {
    int in_width = 0;
    int out_width = 0;
    Activation activation = Activation::Relu;
    std::optional<int> residual_from;
};

struct Layer {
    LayerSpec spec;
    std::vector<double> w;  // row-major [out][in]
    std::vector<double> b;

    std::size_t param_count() const { return w.size() + b.size(); }
};

// Per-feature affine input normalization, fitted on the training split.
struct InputNorm {
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    std::array<double, 3> std{1.0, 1.0, 1.0};
    bool fitted = false;
};

// Two residual fully connected branches over (omega_ref, omega_meas, iq_pi),
// merged by a tanh layer into a correction in [-1, 1] that is scaled to amps
// by target_scale.
struct TinyFCModel {
    std::string arch_version = "tinyfc-v1";
    std::vector<std::vector<Layer>> branches;
    Layer merge;
    InputNorm input_norm;
    double target_scale = 1.0;

    std::size_t param_count() const;
    void validate() const;  // shape and residual-width checks
};

inline constexpr int kTinyFCInputs = 3;
// Branch layer widths of the reference architecture; residual skips sit on
// layers 3 and 4 (sources: activations 2 and 3). Lands at 1421 parameters.
inline const std::vector<int> kDefaultBranchWidths = {10, 14, 14, 14, 6};

// Builds the two-branch model: 5 FC layers per branch with ReLU, identity
// skips on layers 3 and 4, tanh merge. widths[1] == widths[2] == widths[3] is
// required by the skip shape checks. Weights are Glorot-uniform from the
// seed, biases zero.
TinyFCModel build_tinyfc(const std::vector<int>& hidden_widths,
                         std::uint64_t seed);

// Merge output in [-1, 1]. Throws StateError when input_norm is not fitted.
double forward_unit(const TinyFCModel& model, double omega_ref,
                    double omega_meas, double iq_pi);
// Correction in amps: target_scale * forward_unit(...).
double forward(const TinyFCModel& model, double omega_ref, double omega_meas,
               double iq_pi);

// Wires the model into a loop config: augmentor = forward_unit, augment_scale
// = target_scale.
void attach_augmentor(LoopConfig& cfg, const TinyFCModel& model);

struct TrainConfig {
    int epochs = 50;
    int batch_size = 256;
    double learning_rate = 1e-3;
    enum class Optimizer { Sgd, Adam } optimizer = Optimizer::Adam;
    std::uint64_t seed = 0;
    std::array<double, 3> split{0.8, 0.1, 0.1};

    void validate() const;
};

struct DatasetSplit {
    std::vector<DatasetRecord> train, val, test;
};

// Seeded shuffle, then sizes floor(r0*n) / floor(r1*n) / remainder.
// Throws DomainError when n < 10 or the ratios do not sum to 1.
DatasetSplit split_dataset(const std::vector<DatasetRecord>& dataset,
                           const std::array<double, 3>& ratios,
                           std::uint64_t seed);

struct EpochStats {
    int epoch = 0;
    double train_mse = 0.0;  // mean of minibatch losses, normalized targets
    double val_mse = 0.0;    // full validation pass, normalized targets
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_val_mse = 0.0;
    double test_mse = 0.0;  // at the best checkpoint, normalized targets
};

// Minimizes the mean squared error of the normalized correction target by
// minibatch gradient descent; input normalization and target_scale are fitted
// on the training split before the first epoch. The returned model carries
// the weights of the best validation epoch.
// Throws TrainDivergedError (with the epoch) if the loss goes non-finite.
TrainHistory train(TinyFCModel& model, const std::vector<DatasetRecord>& dataset,
                   const TrainConfig& cfg);

// Same loop started from the given weights at 0.1x learning rate, keeping the
// existing input normalization; target_scale only grows (max of old and new).
TrainHistory fine_tune(TinyFCModel& model,
                       const std::vector<DatasetRecord>& dataset,
                       const TrainConfig& cfg);

// Plain mean squared error; lengths must match and be >= 1.
double mse(const std::vector<double>& gt, const std::vector<double>& pred);

// Activations over a calibration set, used by the pruning and quantization
// passes. result[b][k] is an n x width(activation k) row-major matrix for
// branch b; activation 0 is the normalized input.
std::vector<std::vector<std::vector<double>>> collect_activations(
    const TinyFCModel& model,
    const std::vector<std::array<double, 3>>& inputs);

// Gradient of the batch MSE loss for every parameter, laid out in the same
// order as flatten_params(). Exposed for the finite-difference check.
std::vector<double> loss_gradient(const TinyFCModel& model,
                                  const std::vector<std::array<double, 4>>& batch);
double batch_loss(const TinyFCModel& model,
                  const std::vector<std::array<double, 4>>& batch);
std::vector<double> flatten_params(const TinyFCModel& model);
void unflatten_params(TinyFCModel& model, const std::vector<double>& flat);

}  // namespace foclab
