#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "foclab/gt.hpp"
#include "foclab/hpo.hpp"
#include "foclab/loop.hpp"
#include "foclab/metrics.hpp"
#include "foclab/motor.hpp"
#include "foclab/profile.hpp"
#include "foclab/prune.hpp"
#include "foclab/tinyfc.hpp"

namespace foclab {

struct ProfileSpec {
    std::string kind = "case1";  // case1 | case2 | file
    std::uint64_t seed = 1;
    std::filesystem::path path;  // for kind == file
};

struct HpoConfig {
    bool enabled = false;
    int budget = 30;
    std::uint64_t seed = 11;
    std::size_t subsample = 30000;
    int epochs = 6;
};

// Everything a run needs; every seed is explicit, nothing falls back to the
// wall clock.
struct ExperimentConfig {
    int schema_version = 1;
    MotorParams plant;
    PIGains speed_gains;
    PIGains id_gains;
    PIGains iq_gains;
    double sample_time = kSampleTime;
    ProfileSpec profile;
    double duration = 10.0;
    GtConfig gt;
    TrainConfig train;
    MetricsConfig metrics;
    PruneConfig prune;
    std::size_t quant_calibration = 4096;
    HpoConfig hpo;
    int bench_runs = 300;
    std::uint64_t model_seed = 42;
    std::optional<std::filesystem::path> base_model;  // fine-tune source

    LoopConfig loop_config() const;
    void validate() const;
};

// Tuned defaults reproducing the step-overshoot pathology and its correction.
ExperimentConfig default_case1_config();
// Same plant, the step+ramp profile, exponential rectification targets.
ExperimentConfig default_case2_config();

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);
// Throws ConfigError on parse/validation failure or when base_model is set
// but missing on disk.
ExperimentConfig load_config(const std::filesystem::path& path);

ReferenceProfile make_profile(const ProfileSpec& spec);

struct ExperimentResult {
    std::filesystem::path out_dir;
    std::map<std::string, LoopMetrics> metrics;  // pi, tinyfc, pruned, quantized[, hpo]
    std::map<std::string, std::filesystem::path> artifacts;
};

// The full chain: PI-only simulation, ground-truth manufacture, training (or
// fine-tuning from base_model), corrected re-simulation, PCA pruning, int8
// quantization, their re-simulations, metrics, cost reports, plots and a
// comparison table, all under out_dir. Stage failures carry the stage name
// and leave the artifacts produced so far on disk.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::filesystem::path& out_dir);

// metrics.json payload for a set of named controller metrics, with percent
// changes against the "pi" entry. Deterministic bytes.
std::string metrics_to_json(const std::map<std::string, LoopMetrics>& metrics);

}  // namespace foclab
