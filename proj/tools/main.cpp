#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "foclab/cost.hpp"
#include "foclab/errors.hpp"
#include "foclab/experiment.hpp"
#include "foclab/gt.hpp"
#include "foclab/hpo.hpp"
#include "foclab/metrics.hpp"
#include "foclab/model_io.hpp"
#include "foclab/quant.hpp"
#include "foclab/svg.hpp"
#include "foclab/trace.hpp"

namespace fs = std::filesystem;
using namespace foclab;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::int64_t seed = -1;  // overrides the profile seed when >= 0
};

ExperimentConfig resolve_config(const GlobalOpts& g) {
    ExperimentConfig cfg = g.config_path.empty() ? default_case1_config()
                                                 : load_config(g.config_path);
    if (g.seed >= 0) cfg.profile.seed = static_cast<std::uint64_t>(g.seed);
    return cfg;
}

fs::path ensure_out(const GlobalOpts& g) {
    fs::create_directories(g.out_dir);
    return g.out_dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for writing: " + path.string());
    f << text;
    if (!f.good()) throw Error("write failed: " + path.string());
}

std::vector<std::array<double, 3>> dataset_inputs(
    const std::vector<DatasetRecord>& ds, std::size_t target) {
    std::vector<std::array<double, 3>> out;
    const std::size_t stride = std::max<std::size_t>(1, ds.size() / target);
    for (std::size_t i = 0; i < ds.size() && out.size() < target; i += stride) {
        out.push_back({ds[i].omega_ref, ds[i].omega_meas, ds[i].iq_pi});
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"foclab: PMSM field-oriented control with a tiny learned current corrector"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "experiment config JSON");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--seed", g.seed, "override the profile seed");

    // simulate
    auto* sim = app.add_subcommand("simulate", "run the closed loop and write a trace CSV");
    std::string sim_model, sim_qmodel;
    bool sim_plot = false;
    sim->add_option("--model", sim_model, "TinyFC model JSON to insert into the loop");
    sim->add_option("--int8-model", sim_qmodel, "quantized model JSON to insert");
    sim->add_flag("--plot", sim_plot, "also emit an SVG plot");

    // gen-gt
    auto* gengt = app.add_subcommand("gen-gt", "manufacture training targets from a PI trace");
    std::string gengt_trace;
    gengt->add_option("--trace", gengt_trace, "PI-only trace CSV")->required();

    // train / finetune
    auto* tr = app.add_subcommand("train", "train a TinyFC on a dataset CSV");
    std::string tr_dataset;
    tr->add_option("--dataset", tr_dataset, "dataset CSV")->required();

    auto* ft = app.add_subcommand("finetune", "fine-tune an existing model on a dataset CSV");
    std::string ft_dataset, ft_model;
    ft->add_option("--dataset", ft_dataset, "dataset CSV")->required();
    ft->add_option("--model", ft_model, "model JSON to start from")->required();

    // hpo
    auto* hp = app.add_subcommand("hpo", "hyperparameter search over the TinyFC space");
    std::string hp_dataset;
    hp->add_option("--dataset", hp_dataset, "dataset CSV")->required();

    // prune / quantize
    auto* pr = app.add_subcommand("prune", "PCA projection pruning");
    std::string pr_model, pr_dataset;
    pr->add_option("--model", pr_model, "model JSON")->required();
    pr->add_option("--dataset", pr_dataset, "calibration dataset CSV")->required();

    auto* qz = app.add_subcommand("quantize", "int8 post-training quantization");
    std::string qz_model, qz_dataset;
    qz->add_option("--model", qz_model, "model JSON")->required();
    qz->add_option("--dataset", qz_dataset, "calibration dataset CSV")->required();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "loop metrics for a trace CSV");
    std::string ev_trace;
    ev->add_option("--trace", ev_trace, "trace CSV")->required();

    // bench
    auto* be = app.add_subcommand("bench", "cost model and host latency for a model");
    std::string be_model;
    bool be_int8 = false;
    be->add_option("--model", be_model, "model JSON")->required();
    be->add_flag("--int8", be_int8, "treat the file as a quantized model");

    // report
    auto* rp = app.add_subcommand("report",
                                  "full pipeline: simulate, rectify, train, optimize, compare");

    CLI11_PARSE(app, argc, argv);

    try {
        const ExperimentConfig cfg = resolve_config(g);
        const fs::path out = ensure_out(g);

        if (sim->parsed()) {
            if (!sim_model.empty() && !sim_qmodel.empty()) {
                throw ConfigError("simulate: pass either --model or --int8-model");
            }
            LoopConfig loop = cfg.loop_config();
            if (!sim_model.empty()) attach_augmentor(loop, load_model(sim_model));
            if (!sim_qmodel.empty()) attach_augmentor(loop, load_qmodel(sim_qmodel));
            const ReferenceProfile profile = make_profile(cfg.profile);
            SimTrace trace = run_closed_loop(profile, loop, cfg.plant, cfg.duration);
            write_trace_csv(trace, out / "trace.csv");
            if (sim_plot) plot_trace(trace, out / "trace.svg");
            std::cout << "wrote " << (out / "trace.csv").string() << " ("
                      << trace.size() << " rows)\n";
        } else if (gengt->parsed()) {
            SimTrace trace = read_trace_csv(fs::path(gengt_trace));
            auto ds = make_ground_truth(trace, cfg.gt);
            write_dataset_csv(ds, out / "dataset.csv");
            std::cout << "wrote " << (out / "dataset.csv").string() << " ("
                      << ds.size() << " rows)\n";
        } else if (tr->parsed()) {
            auto ds = read_dataset_csv(fs::path(tr_dataset));
            TinyFCModel model = build_tinyfc(kDefaultBranchWidths, cfg.model_seed);
            TrainHistory h = train(model, ds, cfg.train);
            save_model(model, out / "tinyfc.json");
            nlohmann::json hj;
            hj["best_epoch"] = h.best_epoch;
            hj["best_val_mse"] = h.best_val_mse;
            hj["test_mse"] = h.test_mse;
            for (const auto& e : h.epochs) {
                hj["epochs"].push_back({{"epoch", e.epoch},
                                        {"train_mse", e.train_mse},
                                        {"val_mse", e.val_mse}});
            }
            write_file(out / "history.json", hj.dump(2) + "\n");
            std::cout << "best val mse " << h.best_val_mse << " (epoch "
                      << h.best_epoch << "), model at "
                      << (out / "tinyfc.json").string() << "\n";
        } else if (ft->parsed()) {
            auto ds = read_dataset_csv(fs::path(ft_dataset));
            TinyFCModel model = load_model(ft_model);
            TrainHistory h = fine_tune(model, ds, cfg.train);
            save_model(model, out / "tinyfc_finetuned.json");
            std::cout << "best val mse " << h.best_val_mse << ", model at "
                      << (out / "tinyfc_finetuned.json").string() << "\n";
        } else if (hp->parsed()) {
            auto ds = read_dataset_csv(fs::path(hp_dataset));
            auto outcome = hpo_tinyfc(ds, cfg.train, cfg.hpo.budget, cfg.hpo.seed,
                                      cfg.hpo.subsample, cfg.hpo.epochs);
            save_model(outcome.model, out / "hpo_model.json");
            std::string log;
            for (const auto& t : outcome.search.trials) {
                nlohmann::json tj;
                tj["trial"] = t.index;
                tj["params"] = t.params;
                tj["value"] = t.failed ? nlohmann::json(nullptr)
                                       : nlohmann::json(t.value);
                tj["failed"] = t.failed;
                log += tj.dump() + "\n";
            }
            write_file(out / "hpo_trials.jsonl", log);
            std::cout << "best trial " << outcome.search.best_index
                      << " val mse " << outcome.val_mse << ", model at "
                      << (out / "hpo_model.json").string() << "\n";
        } else if (pr->parsed()) {
            TinyFCModel model = load_model(pr_model);
            auto ds = read_dataset_csv(fs::path(pr_dataset));
            TinyFCModel pruned = pca_prune(
                model, dataset_inputs(ds, cfg.prune.calibration_size), cfg.prune);
            save_model(pruned, out / "pruned.json");
            std::cout << "params " << model.param_count() << " -> "
                      << pruned.param_count() << ", model at "
                      << (out / "pruned.json").string() << "\n";
        } else if (qz->parsed()) {
            TinyFCModel model = load_model(qz_model);
            auto ds = read_dataset_csv(fs::path(qz_dataset));
            QuantizedModel q =
                quantize_int8(model, dataset_inputs(ds, cfg.quant_calibration));
            save_qmodel(q, out / "quantized.json");
            std::cout << "quantized model at " << (out / "quantized.json").string()
                      << " (error bound " << q.float_error_bound << " A)\n";
        } else if (ev->parsed()) {
            SimTrace trace = read_trace_csv(fs::path(ev_trace));
            LoopMetrics m = compute_metrics(trace, cfg.metrics);
            std::map<std::string, LoopMetrics> one{{"trace", m}};
            const std::string text = metrics_to_json(one);
            write_file(out / "metrics.json", text);
            std::cout << text;
        } else if (be->parsed()) {
            CostReport r;
            if (be_int8) {
                r = make_cost_report(load_qmodel(be_model), cfg.bench_runs);
            } else {
                r = make_cost_report(load_model(be_model), cfg.bench_runs);
            }
            nlohmann::json j;
            j["macc"] = r.macc;
            j["param_count"] = r.param_count;
            j["weight_bytes"] = r.memory.weight_bytes;
            j["activation_bytes"] = r.memory.activation_bytes;
            j["lib_flash_bytes"] = r.runtime_overhead_bytes;
            j["lib_ram_bytes"] = r.runtime_ram_bytes;
            j["latency_us"] = {{"min", r.latency.min_us},
                               {"median", r.latency.median_us},
                               {"p99", r.latency.p99_us},
                               {"inner_iterations", r.latency.inner_iterations}};
            write_file(out / "cost.json", j.dump(2) + "\n");
            std::cout << j.dump(2) << "\n";
        } else if (rp->parsed()) {
            ExperimentResult res = run_experiment(cfg, out);
            std::cout << "report bundle at " << res.out_dir.string() << "\n";
            std::ifstream table(res.out_dir / "table.txt");
            std::cout << table.rdbuf();
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const SimDivergedError& e) {
        std::cerr << "simulation diverged: " << e.what() << "\n";
        return 3;
    } catch (const TrainDivergedError& e) {
        std::cerr << "training failed: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
