#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "foclab/gt.hpp"
#include "foclab/tinyfc.hpp"

namespace foclab {

// One searchable hyperparameter. Continuous parameters may be sampled in log
// space; integer parameters are rounded after sampling; choice parameters
// index into an explicit value list.
struct ParamSpec {
    enum class Kind { Continuous, Integer, Choice };
    std::string name;
    Kind kind = Kind::Continuous;
    double lo = 0.0;
    double hi = 1.0;
    bool log_scale = false;
    std::vector<double> choices;
};

struct HPOSpace {
    std::vector<ParamSpec> params;
    int budget = 30;
    std::uint64_t seed = 0;
    enum class Mode { Bayes, Random } mode = Mode::Bayes;

    void validate() const;
};

using TrialParams = std::map<std::string, double>;
// Objective to minimize (validation MSE). Throwing marks the trial as failed.
using Objective = std::function<double(const TrialParams&)>;

struct TrialResult {
    int index = 0;
    TrialParams params;
    double value = 0.0;
    bool failed = false;
};

struct HPOResult {
    std::vector<TrialResult> trials;
    int best_index = -1;

    const TrialResult& best() const { return trials.at(best_index); }
};

// Surrogate-guided minimization: seeded random initialization, then a
// Gaussian-process posterior (squared-exponential kernel over the normalized
// box) with expected-improvement acquisition maximized over seeded candidate
// draws. Mode::Random falls back to pure random search with the same seed
// stream. Fully deterministic for a given space.
//
// Throws Error (carrying the count) if every trial fails.
HPOResult hpo_search(const HPOSpace& space, const Objective& objective);

// The standard TinyFC search space: branch widths, learning rate and batch
// size. Trials train on a subsample for speed; the returned model is the best
// configuration retrained deterministically.
struct TinyFCSearchOutcome {
    HPOResult search;
    TinyFCModel model;
    TrainConfig config;
    double val_mse = 0.0;
};

TinyFCSearchOutcome hpo_tinyfc(const std::vector<DatasetRecord>& dataset,
                               const TrainConfig& base, int budget,
                               std::uint64_t seed,
                               std::size_t trial_subsample = 30000,
                               int trial_epochs = 6);

}  // namespace foclab
