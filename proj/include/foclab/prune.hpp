#pragma once

#include <array>
#include <vector>

#include "foclab/tinyfc.hpp"

namespace foclab {

struct PruneConfig {
    double energy_threshold = 0.95;      // fraction of variance kept, (0, 1]
    std::size_t calibration_size = 4096; // informational; caller slices inputs

    void validate() const;
};

// Projection pruning. Per hidden layer: standardize the activations over the
// calibration set, eigen-decompose their correlation matrix, keep the
// smallest neuron subset whose leading eigenvalues explain at least
// energy_threshold of the variance (chosen by column-pivoted QR on the
// leading eigenvectors), then fold the removed neurons into every consumer by
// least-squares regression onto the kept ones. Activations tied by an
// identity skip must share a neuron basis, so they keep the union of their
// per-layer subsets. Rank-deficient covariances reduce to rank truncation;
// they never fail.
//
// A threshold of exactly 1.0 returns the model unchanged. Below 1.0 every
// group sheds the neurons the energy rule marks redundant; groups whose
// correlation spectrum needs all components stay intact.
//
// The calibration set must hold at least 10x the widest hidden layer.
TinyFCModel pca_prune(const TinyFCModel& model,
                      const std::vector<std::array<double, 3>>& calibration_inputs,
                      const PruneConfig& cfg = {});

}  // namespace foclab
