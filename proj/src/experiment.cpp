#include "foclab/experiment.hpp"

#include <fstream>
#include <json.hpp>

#include "foclab/cost.hpp"
#include "foclab/errors.hpp"
#include "foclab/model_io.hpp"
#include "foclab/quant.hpp"
#include "foclab/svg.hpp"
#include "foclab/trace.hpp"

namespace foclab {

namespace {

using nlohmann::json;

json gains_to_json(const PIGains& g) {
    return {{"kp", g.kp}, {"ki", g.ki}, {"out_min", g.out_min}, {"out_max", g.out_max}};
}

PIGains gains_from_json(const json& j) {
    return {j.at("kp").get<double>(), j.at("ki").get<double>(),
            j.at("out_min").get<double>(), j.at("out_max").get<double>()};
}

}  // namespace

LoopConfig ExperimentConfig::loop_config() const {
    LoopConfig cfg;
    cfg.speed_gains = speed_gains;
    cfg.id_gains = id_gains;
    cfg.iq_gains = iq_gains;
    cfg.sample_time = sample_time;
    return cfg;
}

void ExperimentConfig::validate() const {
    plant.validate();
    loop_config().validate();
    gt.validate();
    train.validate();
    metrics.validate();
    prune.validate();
    if (profile.kind != "case1" && profile.kind != "case2" && profile.kind != "file") {
        throw ConfigError("config: profile.kind must be case1, case2 or file");
    }
    if (profile.kind == "file" && profile.path.empty()) {
        throw ConfigError("config: profile.kind 'file' needs profile.path");
    }
    if (!(duration > 0.0)) throw ConfigError("config: duration must be > 0");
    if (hpo.budget < 2) throw ConfigError("config: hpo.budget must be >= 2");
}

ExperimentConfig default_case1_config() {
    ExperimentConfig cfg;
    const LoopConfig loop = default_loop_config();
    cfg.speed_gains = loop.speed_gains;
    cfg.id_gains = loop.id_gains;
    cfg.iq_gains = loop.iq_gains;
    cfg.profile = {"case1", 1, {}};
    cfg.gt.method = ThresholdMethod{};
    cfg.gt.band = 0.06;
    cfg.gt.min_len = 30;
    cfg.train.epochs = 60;
    cfg.train.seed = 7;
    return cfg;
}

ExperimentConfig default_case2_config() {
    ExperimentConfig cfg = default_case1_config();
    cfg.profile = {"case2", 1, {}};
    // 1 ms pulls the rectified signal onto the settled current quickly enough
    // for the short (100 ms) case-2 response intervals
    cfg.gt.method = RectifyMethod{1e-3};
    cfg.gt.band = 0.06;
    return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["schema_version"] = cfg.schema_version;
    j["plant"] = {{"nominal_voltage", cfg.plant.nominal_voltage},
                  {"max_current", cfg.plant.max_current},
                  {"pole_pairs", cfg.plant.pole_pairs},
                  {"max_speed", cfg.plant.max_speed},
                  {"stator_resistance", cfg.plant.stator_resistance},
                  {"d_inductance", cfg.plant.d_inductance},
                  {"q_inductance", cfg.plant.q_inductance},
                  {"flux_linkage", cfg.plant.flux_linkage},
                  {"inertia", cfg.plant.inertia},
                  {"friction", cfg.plant.friction}};
    j["control"] = {{"speed_gains", gains_to_json(cfg.speed_gains)},
                    {"id_gains", gains_to_json(cfg.id_gains)},
                    {"iq_gains", gains_to_json(cfg.iq_gains)},
                    {"sample_time", cfg.sample_time}};
    j["profile"] = {{"kind", cfg.profile.kind},
                    {"seed", cfg.profile.seed},
                    {"path", cfg.profile.path.string()}};
    j["duration"] = cfg.duration;
    json gt;
    if (const auto* th = std::get_if<ThresholdMethod>(&cfg.gt.method)) {
        gt["method"] = "threshold";
        if (th->c) gt["c"] = *th->c;
        else gt["c"] = nullptr;
        gt["tau"] = nullptr;
    } else {
        gt["method"] = "rectify";
        gt["c"] = nullptr;
        gt["tau"] = std::get<RectifyMethod>(cfg.gt.method).tau;
    }
    gt["band"] = cfg.gt.band;
    gt["min_len"] = cfg.gt.min_len;
    j["gt"] = gt;
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"learning_rate", cfg.train.learning_rate},
                  {"optimizer", cfg.train.optimizer == TrainConfig::Optimizer::Adam
                                    ? "adam"
                                    : "sgd"},
                  {"seed", cfg.train.seed},
                  {"split", cfg.train.split}};
    j["metrics"] = {{"band", cfg.metrics.band},
                    {"min_len", cfg.metrics.min_len},
                    {"transient_exclusion", cfg.metrics.transient_exclusion}};
    j["prune"] = {{"energy_threshold", cfg.prune.energy_threshold},
                  {"calibration_size", cfg.prune.calibration_size}};
    j["quant"] = {{"calibration_size", cfg.quant_calibration}};
    j["hpo"] = {{"enabled", cfg.hpo.enabled},
                {"budget", cfg.hpo.budget},
                {"seed", cfg.hpo.seed},
                {"subsample", cfg.hpo.subsample},
                {"epochs", cfg.hpo.epochs}};
    j["bench"] = {{"n_runs", cfg.bench_runs}};
    j["model_seed"] = cfg.model_seed;
    j["base_model"] = cfg.base_model ? json(cfg.base_model->string()) : json(nullptr);
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    ExperimentConfig cfg;
    try {
        cfg.schema_version = j.at("schema_version").get<int>();
        if (cfg.schema_version != 1) {
            throw ConfigError("config: unsupported schema_version");
        }
        const auto& p = j.at("plant");
        cfg.plant.nominal_voltage = p.at("nominal_voltage").get<double>();
        cfg.plant.max_current = p.at("max_current").get<double>();
        cfg.plant.pole_pairs = p.at("pole_pairs").get<int>();
        cfg.plant.max_speed = p.at("max_speed").get<double>();
        cfg.plant.stator_resistance = p.at("stator_resistance").get<double>();
        cfg.plant.d_inductance = p.at("d_inductance").get<double>();
        cfg.plant.q_inductance = p.at("q_inductance").get<double>();
        cfg.plant.flux_linkage = p.at("flux_linkage").get<double>();
        cfg.plant.inertia = p.at("inertia").get<double>();
        cfg.plant.friction = p.at("friction").get<double>();
        const auto& c = j.at("control");
        cfg.speed_gains = gains_from_json(c.at("speed_gains"));
        cfg.id_gains = gains_from_json(c.at("id_gains"));
        cfg.iq_gains = gains_from_json(c.at("iq_gains"));
        cfg.sample_time = c.at("sample_time").get<double>();
        const auto& pr = j.at("profile");
        cfg.profile.kind = pr.at("kind").get<std::string>();
        cfg.profile.seed = pr.at("seed").get<std::uint64_t>();
        cfg.profile.path = pr.at("path").get<std::string>();
        cfg.duration = j.at("duration").get<double>();
        const auto& gt = j.at("gt");
        const auto method = gt.at("method").get<std::string>();
        if (method == "threshold") {
            ThresholdMethod th;
            if (!gt.at("c").is_null()) th.c = gt.at("c").get<double>();
            cfg.gt.method = th;
        } else if (method == "rectify") {
            RectifyMethod re;
            if (!gt.at("tau").is_null()) re.tau = gt.at("tau").get<double>();
            cfg.gt.method = re;
        } else {
            throw ConfigError("config: gt.method must be threshold or rectify");
        }
        cfg.gt.band = gt.at("band").get<double>();
        cfg.gt.min_len = gt.at("min_len").get<std::size_t>();
        const auto& t = j.at("train");
        cfg.train.epochs = t.at("epochs").get<int>();
        cfg.train.batch_size = t.at("batch_size").get<int>();
        cfg.train.learning_rate = t.at("learning_rate").get<double>();
        const auto opt = t.at("optimizer").get<std::string>();
        if (opt == "adam") cfg.train.optimizer = TrainConfig::Optimizer::Adam;
        else if (opt == "sgd") cfg.train.optimizer = TrainConfig::Optimizer::Sgd;
        else throw ConfigError("config: train.optimizer must be adam or sgd");
        cfg.train.seed = t.at("seed").get<std::uint64_t>();
        cfg.train.split = t.at("split").get<std::array<double, 3>>();
        const auto& m = j.at("metrics");
        cfg.metrics.band = m.at("band").get<double>();
        cfg.metrics.min_len = m.at("min_len").get<std::size_t>();
        cfg.metrics.transient_exclusion = m.at("transient_exclusion").get<double>();
        const auto& pp = j.at("prune");
        cfg.prune.energy_threshold = pp.at("energy_threshold").get<double>();
        cfg.prune.calibration_size = pp.at("calibration_size").get<std::size_t>();
        cfg.quant_calibration = j.at("quant").at("calibration_size").get<std::size_t>();
        const auto& h = j.at("hpo");
        cfg.hpo.enabled = h.at("enabled").get<bool>();
        cfg.hpo.budget = h.at("budget").get<int>();
        cfg.hpo.seed = h.at("seed").get<std::uint64_t>();
        cfg.hpo.subsample = h.at("subsample").get<std::size_t>();
        cfg.hpo.epochs = h.at("epochs").get<int>();
        cfg.bench_runs = j.at("bench").at("n_runs").get<int>();
        cfg.model_seed = j.at("model_seed").get<std::uint64_t>();
        if (!j.at("base_model").is_null()) {
            cfg.base_model = std::filesystem::path(j.at("base_model").get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: missing or bad field: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("config: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    ExperimentConfig cfg = config_from_json(text);
    if (cfg.base_model && !std::filesystem::exists(*cfg.base_model)) {
        throw ConfigError("config: base_model does not exist: " +
                          cfg.base_model->string());
    }
    if (cfg.profile.kind == "file" && !std::filesystem::exists(cfg.profile.path)) {
        throw ConfigError("config: profile file does not exist: " +
                          cfg.profile.path.string());
    }
    return cfg;
}

ReferenceProfile make_profile(const ProfileSpec& spec) {
    if (spec.kind == "case1") return case1_profile(spec.seed);
    if (spec.kind == "case2") return case2_profile(spec.seed);
    if (spec.kind == "file") {
        std::ifstream f(spec.path, std::ios::binary);
        if (!f) throw ConfigError("profile: cannot open " + spec.path.string());
        json j;
        try {
            j = json::parse(f);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("profile: parse error: ") + e.what());
        }
        ReferenceProfile p;
        try {
            p.duration = j.at("duration").get<double>();
            for (const auto& js : j.at("segments")) {
                ProfileSegment s;
                s.start_time = js.at("start_time").get<double>();
                const auto kind = js.at("kind").get<std::string>();
                if (kind == "step") s.kind = SegmentKind::Step;
                else if (kind == "ramp") s.kind = SegmentKind::Ramp;
                else throw ConfigError("profile: segment kind must be step or ramp");
                s.target = js.at("target").get<double>();
                p.segments.push_back(s);
            }
        } catch (const json::exception& e) {
            throw ConfigError(std::string("profile: bad field: ") + e.what());
        }
        p.validate();
        return p;
    }
    throw ConfigError("profile: unknown kind " + spec.kind);
}

std::string metrics_to_json(const std::map<std::string, LoopMetrics>& metrics) {
    json j;
    j["schema_version"] = 1;
    json controllers;
    for (const auto& [name, m] : metrics) {
        controllers[name] = {
            {"max_deviation", m.max_deviation},
            {"avg_deviation", m.avg_deviation},
            {"max_overshoot", m.max_overshoot ? json(*m.max_overshoot) : json(nullptr)},
        };
    }
    j["controllers"] = controllers;
    json change;
    const auto pi = metrics.find("pi");
    if (pi != metrics.end()) {
        auto pct = [](double base, double value) -> json {
            if (base == 0.0) return nullptr;
            return 100.0 * (value - base) / base;
        };
        for (const auto& [name, m] : metrics) {
            if (name == "pi") continue;
            json entry;
            entry["max_deviation"] = pct(pi->second.max_deviation, m.max_deviation);
            entry["avg_deviation"] = pct(pi->second.avg_deviation, m.avg_deviation);
            entry["max_overshoot"] =
                (pi->second.max_overshoot && m.max_overshoot)
                    ? pct(*pi->second.max_overshoot, *m.max_overshoot)
                    : json(nullptr);
            change[name] = entry;
        }
    }
    j["change_vs_pi_percent"] = change;
    return j.dump(2) + "\n";
}

namespace {

// Rethrows with the failing stage in the message, preserving the error type
// that drives CLI exit codes.
template <class Fn>
auto stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const SimDivergedError& e) {
        throw SimDivergedError("stage " + name + ": " + e.what(), e.step());
    } catch (const TrainDivergedError& e) {
        throw TrainDivergedError("stage " + name + ": " + e.what(), e.epoch());
    } catch (const ConfigError& e) {
        throw ConfigError("stage " + name + ": " + e.what());
    } catch (const Error& e) {
        throw Error("stage " + name + ": " + e.what());
    }
}

// Deterministic strided calibration subsample. The corrector operates on the
// corrected loop's trajectories, so calibration draws from the augmented
// trace: those are the inputs the compressed model will actually see.
std::vector<std::array<double, 3>> calibration_inputs(const SimTrace& trace,
                                                      std::size_t target) {
    std::vector<std::array<double, 3>> out;
    const std::size_t stride = std::max<std::size_t>(1, trace.size() / target);
    for (std::size_t i = 0; i < trace.size() && out.size() < target; i += stride) {
        out.push_back({trace.rows[i].omega_ref, trace.rows[i].omega_meas,
                       trace.rows[i].iq_pi});
    }
    return out;
}

json cost_to_json(const CostReport& r) {
    json j;
    j["macc"] = r.macc;
    j["param_count"] = r.param_count;
    j["weight_bytes"] = r.memory.weight_bytes;
    j["activation_bytes"] = r.memory.activation_bytes;
    j["lib_flash_bytes"] = r.runtime_overhead_bytes;
    j["lib_ram_bytes"] = r.runtime_ram_bytes;
    if (r.latency.n_runs > 0) {
        j["latency_us"] = {{"min", r.latency.min_us},
                           {"median", r.latency.median_us},
                           {"p99", r.latency.p99_us},
                           {"n_runs", r.latency.n_runs},
                           {"inner_iterations", r.latency.inner_iterations}};
    } else {
        j["latency_us"] = nullptr;
    }
    return j;
}

std::string render_cost_table(const std::map<std::string, CostReport>& reports) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s %8s %8s %14s %14s %12s\n", "model",
                  "params", "MACC", "weights(KiB)", "act(KiB)", "median(us)");
    out << line;
    out << std::string(72, '-') << '\n';
    for (const auto& [name, r] : reports) {
        std::snprintf(line, sizeof(line), "%-12s %8zu %8zu %14.2f %14.3f %12.2f\n",
                      name.c_str(), r.param_count, r.macc,
                      r.memory.weight_bytes / 1024.0,
                      r.memory.activation_bytes / 1024.0, r.latency.median_us);
        out << line;
    }
    return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for writing: " + path.string());
    f << text;
    if (!f.good()) throw Error("write failed: " + path.string());
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    ExperimentResult result;
    result.out_dir = out_dir;
    auto artifact = [&](const std::string& name) {
        result.artifacts[name] = out_dir / name;
        return out_dir / name;
    };

    const ReferenceProfile profile = make_profile(cfg.profile);
    const LoopConfig loop = cfg.loop_config();

    // PI-only baseline
    SimTrace pi_trace = stage("simulate-pi", [&] {
        return run_closed_loop(profile, loop, cfg.plant, cfg.duration);
    });
    write_trace_csv(pi_trace, artifact("pi_trace.csv"));
    result.metrics["pi"] = compute_metrics(pi_trace, cfg.metrics);

    // training targets
    auto dataset = stage("ground-truth", [&] { return make_ground_truth(pi_trace, cfg.gt); });
    write_dataset_csv(dataset, artifact("dataset.csv"));

    // train or fine-tune
    TinyFCModel model = stage(cfg.base_model ? "finetune" : "train", [&] {
        if (cfg.base_model) {
            TinyFCModel m = load_model(*cfg.base_model);
            fine_tune(m, dataset, cfg.train);
            return m;
        }
        TinyFCModel m = build_tinyfc(kDefaultBranchWidths, cfg.model_seed);
        train(m, dataset, cfg.train);
        return m;
    });
    save_model(model, artifact("tinyfc.json"));

    auto simulate_with = [&](const std::string& stage_name, auto&& attach) {
        return stage(stage_name, [&] {
            LoopConfig aug = loop;
            attach(aug);
            return run_closed_loop(profile, aug, cfg.plant, cfg.duration);
        });
    };

    SimTrace aug_trace = simulate_with(
        "simulate-tinyfc", [&](LoopConfig& c) { attach_augmentor(c, model); });
    write_trace_csv(aug_trace, artifact("tinyfc_trace.csv"));
    result.metrics["tinyfc"] = compute_metrics(aug_trace, cfg.metrics);

    // pruning
    const auto cal_prune = calibration_inputs(aug_trace, cfg.prune.calibration_size);
    TinyFCModel pruned = stage("prune", [&] { return pca_prune(model, cal_prune, cfg.prune); });
    save_model(pruned, artifact("pruned.json"));
    SimTrace pruned_trace = simulate_with(
        "simulate-pruned", [&](LoopConfig& c) { attach_augmentor(c, pruned); });
    write_trace_csv(pruned_trace, artifact("pruned_trace.csv"));
    result.metrics["pruned"] = compute_metrics(pruned_trace, cfg.metrics);

    // quantization of the pruned model
    const auto cal_quant = calibration_inputs(aug_trace, cfg.quant_calibration);
    QuantizedModel quantized =
        stage("quantize", [&] { return quantize_int8(pruned, cal_quant); });
    save_qmodel(quantized, artifact("quantized.json"));
    SimTrace quant_trace = simulate_with(
        "simulate-quantized", [&](LoopConfig& c) { attach_augmentor(c, quantized); });
    write_trace_csv(quant_trace, artifact("quantized_trace.csv"));
    result.metrics["quantized"] = compute_metrics(quant_trace, cfg.metrics);

    // optional hyperparameter search
    std::optional<TinyFCSearchOutcome> hpo_out;
    if (cfg.hpo.enabled) {
        hpo_out = stage("hpo", [&] {
            return hpo_tinyfc(dataset, cfg.train, cfg.hpo.budget, cfg.hpo.seed,
                              cfg.hpo.subsample, cfg.hpo.epochs);
        });
        save_model(hpo_out->model, artifact("hpo_model.json"));
        std::ostringstream log;
        for (const auto& t : hpo_out->search.trials) {
            json tj;
            tj["trial"] = t.index;
            tj["params"] = t.params;
            tj["value"] = t.failed ? json(nullptr) : json(t.value);
            tj["failed"] = t.failed;
            log << tj.dump() << '\n';
        }
        write_text(artifact("hpo_trials.jsonl"), log.str());
        SimTrace hpo_trace = simulate_with("simulate-hpo", [&](LoopConfig& c) {
            attach_augmentor(c, hpo_out->model);
        });
        write_trace_csv(hpo_trace, artifact("hpo_trace.csv"));
        result.metrics["hpo"] = compute_metrics(hpo_trace, cfg.metrics);
    }

    // metrics + comparison
    write_text(artifact("metrics.json"), metrics_to_json(result.metrics));

    // deployability costs
    std::map<std::string, CostReport> costs;
    costs["tinyfc"] = make_cost_report(model, cfg.bench_runs);
    costs["pruned"] = make_cost_report(pruned, cfg.bench_runs);
    costs["quantized"] = make_cost_report(quantized, cfg.bench_runs);
    if (hpo_out) costs["hpo"] = make_cost_report(hpo_out->model, cfg.bench_runs);
    json cj;
    cj["schema_version"] = 1;
    for (const auto& [name, r] : costs) cj["models"][name] = cost_to_json(r);
    write_text(artifact("cost.json"), cj.dump(2) + "\n");
    write_text(artifact("table.txt"), render_cost_table(costs));

    // plots
    stage("plots", [&] {
        plot_trace(pi_trace, artifact("pi_trace.svg"));
        plot_trace(aug_trace, artifact("tinyfc_trace.svg"));
        plot_trace(pruned_trace, artifact("pruned_trace.svg"));
        plot_trace(quant_trace, artifact("quantized_trace.svg"));
        return 0;
    });

    return result;
}

}  // namespace foclab
