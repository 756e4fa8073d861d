#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "foclab/cost.hpp"
#include "foclab/errors.hpp"
#include "foclab/experiment.hpp"
#include "foclab/gt.hpp"
#include "foclab/hpo.hpp"
#include "foclab/loop.hpp"
#include "foclab/metrics.hpp"
#include "foclab/model_io.hpp"
#include "foclab/motor.hpp"
#include "foclab/profile.hpp"
#include "foclab/prune.hpp"
#include "foclab/quant.hpp"
#include "foclab/svg.hpp"
#include "foclab/tinyfc.hpp"
#include "foclab/trace.hpp"

namespace py = pybind11;
using namespace foclab;

namespace {

GtConfig make_gt_config(const std::string& method, std::optional<double> c,
                        double tau, double band, std::size_t min_len) {
    GtConfig cfg;
    if (method == "threshold") {
        cfg.method = ThresholdMethod{c};
    } else if (method == "rectify") {
        cfg.method = RectifyMethod{tau};
    } else {
        throw ConfigError("gt method must be 'threshold' or 'rectify'");
    }
    cfg.band = band;
    cfg.min_len = min_len;
    return cfg;
}

py::dict trace_columns(const SimTrace& t) {
    const std::size_t n = t.size();
    std::vector<double> tt(n), wr(n), wm(n), iq_pi(n), diq(n), iq_adj(n), id(n),
        vd(n), vq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const TraceRow& r = t.rows[i];
        tt[i] = r.step * t.sample_time;
        wr[i] = r.omega_ref;
        wm[i] = r.omega_meas;
        iq_pi[i] = r.iq_pi;
        diq[i] = r.delta_iq;
        iq_adj[i] = r.iq_adj;
        id[i] = r.i_d;
        vd[i] = r.v_d;
        vq[i] = r.v_q;
    }
    py::dict d;
    d["t"] = tt;
    d["omega_ref"] = wr;
    d["omega_meas"] = wm;
    d["iq_pi"] = iq_pi;
    d["delta_iq"] = diq;
    d["iq_adj"] = iq_adj;
    d["id"] = id;
    d["vd"] = vd;
    d["vq"] = vq;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "PMSM field-oriented control lab with a tiny learned current corrector";

    py::register_exception<ConfigError>(m, "FoclabConfigError");
    py::register_exception<SimDivergedError>(m, "SimDivergedError");
    py::register_exception<TrainDivergedError>(m, "TrainDivergedError");

    py::class_<MotorParams>(m, "MotorParams")
        .def(py::init<>())
        .def_readwrite("nominal_voltage", &MotorParams::nominal_voltage)
        .def_readwrite("max_current", &MotorParams::max_current)
        .def_readwrite("pole_pairs", &MotorParams::pole_pairs)
        .def_readwrite("max_speed", &MotorParams::max_speed)
        .def_readwrite("stator_resistance", &MotorParams::stator_resistance)
        .def_readwrite("d_inductance", &MotorParams::d_inductance)
        .def_readwrite("q_inductance", &MotorParams::q_inductance)
        .def_readwrite("flux_linkage", &MotorParams::flux_linkage)
        .def_readwrite("inertia", &MotorParams::inertia)
        .def_readwrite("friction", &MotorParams::friction)
        .def("base_speed", &MotorParams::base_speed)
        .def("torque_constant", &MotorParams::torque_constant);

    py::class_<MotorState>(m, "MotorState")
        .def(py::init<>())
        .def_readwrite("i_d", &MotorState::i_d)
        .def_readwrite("i_q", &MotorState::i_q)
        .def_readwrite("omega_mech", &MotorState::omega_mech)
        .def_readwrite("theta_elec", &MotorState::theta_elec);

    m.def("park_transform", &park_transform, py::arg("alpha"), py::arg("beta"),
          py::arg("theta"));
    m.def("inverse_park", &inverse_park, py::arg("d"), py::arg("q"),
          py::arg("theta"));
    m.def(
        "saturate_voltage",
        [](double v_d, double v_q, double dc_bus) {
            const DqVoltage v = saturate_voltage({v_d, v_q}, dc_bus);
            return std::pair{v.v_d, v.v_q};
        },
        py::arg("v_d"), py::arg("v_q"), py::arg("dc_bus"));
    m.def(
        "step_motor",
        [](const MotorState& s, double v_d, double v_q, double load_torque,
           double dt, const MotorParams& p) {
            return step_motor(s, {v_d, v_q}, load_torque, dt, p);
        },
        py::arg("state"), py::arg("v_d"), py::arg("v_q"),
        py::arg("load_torque"), py::arg("dt"), py::arg("params"));
    m.attr("SAMPLE_TIME") = kSampleTime;

    py::class_<ReferenceProfile>(m, "ReferenceProfile")
        .def("eval", &ReferenceProfile::eval, py::arg("t"))
        .def_readonly("duration", &ReferenceProfile::duration)
        .def("__len__",
             [](const ReferenceProfile& p) { return p.segments.size(); });
    m.def("case1_profile", &case1_profile, py::arg("seed"));
    m.def("case2_profile", &case2_profile, py::arg("seed"));
    m.def("count_transitions", &count_transitions, py::arg("profile"));

    py::class_<SimTrace>(m, "SimTrace")
        .def("__len__", &SimTrace::size)
        .def_readonly("sample_time", &SimTrace::sample_time)
        .def("columns", &trace_columns);
    m.def("write_trace_csv",
          py::overload_cast<const SimTrace&, const std::filesystem::path&>(
              &write_trace_csv),
          py::arg("trace"), py::arg("path"));
    m.def("read_trace_csv",
          py::overload_cast<const std::filesystem::path&>(&read_trace_csv),
          py::arg("path"));

    py::class_<TinyFCModel>(m, "TinyFCModel")
        .def("param_count", &TinyFCModel::param_count)
        .def_readonly("target_scale", &TinyFCModel::target_scale)
        .def_readonly("arch_version", &TinyFCModel::arch_version)
        .def("forward",
             [](const TinyFCModel& mm, double wr, double wm, double iq) {
                 return forward(mm, wr, wm, iq);
             });
    py::class_<QuantizedModel>(m, "QuantizedModel")
        .def_readonly("target_scale", &QuantizedModel::target_scale)
        .def_readonly("float_error_bound", &QuantizedModel::float_error_bound)
        .def("weight_count", &QuantizedModel::weight_count)
        .def("forward", [](const QuantizedModel& q, double wr, double wm,
                           double iq) { return forward_int8(q, wr, wm, iq); });

    m.def("build_tinyfc", &build_tinyfc, py::arg("hidden_widths"),
          py::arg("seed"));
    m.attr("DEFAULT_BRANCH_WIDTHS") = kDefaultBranchWidths;
    m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
    m.def("load_model", &load_model, py::arg("path"));
    m.def("save_qmodel", &save_qmodel, py::arg("model"), py::arg("path"));
    m.def("load_qmodel", &load_qmodel, py::arg("path"));

    m.def(
        "simulate",
        [](const ReferenceProfile& profile, const MotorParams& plant,
           double duration, const TinyFCModel* model,
           const QuantizedModel* qmodel) {
            LoopConfig cfg = default_loop_config();
            if (model && qmodel) {
                throw ConfigError("pass either model or qmodel, not both");
            }
            if (model) attach_augmentor(cfg, *model);
            if (qmodel) attach_augmentor(cfg, *qmodel);
            return run_closed_loop(profile, cfg, plant, duration);
        },
        py::arg("profile"), py::arg("plant") = MotorParams{},
        py::arg("duration") = 10.0, py::arg("model") = nullptr,
        py::arg("qmodel") = nullptr,
        "Closed-loop run with the default gains, optionally corrector-augmented");

    m.def("saturate_threshold", &saturate_threshold, py::arg("x"), py::arg("c"));
    m.def("exp_rectify", &exp_rectify, py::arg("x_initial"), py::arg("x_final"),
          py::arg("t"), py::arg("tau"));
    m.def(
        "make_ground_truth",
        [](const SimTrace& trace, const std::string& method,
           std::optional<double> c, double tau, double band, std::size_t min_len) {
            const auto ds =
                make_ground_truth(trace, make_gt_config(method, c, tau, band, min_len));
            std::vector<double> wr, wm, iq, target;
            for (const auto& r : ds) {
                wr.push_back(r.omega_ref);
                wm.push_back(r.omega_meas);
                iq.push_back(r.iq_pi);
                target.push_back(r.delta_iq_gt);
            }
            py::dict d;
            d["omega_ref"] = wr;
            d["omega_meas"] = wm;
            d["iq_pi"] = iq;
            d["delta_iq_gt"] = target;
            return d;
        },
        py::arg("trace"), py::arg("method") = "threshold",
        py::arg("c") = std::nullopt, py::arg("tau") = 5e-3,
        py::arg("band") = 0.06, py::arg("min_len") = 30);

    m.def(
        "train_on_trace",
        [](const SimTrace& trace, const std::string& method,
           std::optional<double> c, double tau, double band, std::size_t min_len,
           int epochs, std::uint64_t seed, std::uint64_t model_seed) {
            const auto ds =
                make_ground_truth(trace, make_gt_config(method, c, tau, band, min_len));
            TinyFCModel model = build_tinyfc(kDefaultBranchWidths, model_seed);
            TrainConfig cfg;
            cfg.epochs = epochs;
            cfg.seed = seed;
            const TrainHistory h = train(model, ds, cfg);
            py::dict info;
            info["best_val_mse"] = h.best_val_mse;
            info["best_epoch"] = h.best_epoch;
            info["test_mse"] = h.test_mse;
            return std::pair{model, info};
        },
        py::arg("trace"), py::arg("method") = "threshold",
        py::arg("c") = std::nullopt, py::arg("tau") = 5e-3,
        py::arg("band") = 0.06, py::arg("min_len") = 30, py::arg("epochs") = 60,
        py::arg("seed") = 7, py::arg("model_seed") = 42,
        "Ground truth + TinyFC training from a PI-only trace");

    m.def("pca_prune",
          [](const TinyFCModel& model,
             const std::vector<std::array<double, 3>>& cal, double threshold) {
              return pca_prune(model, cal, PruneConfig{threshold, cal.size()});
          },
          py::arg("model"), py::arg("calibration_inputs"),
          py::arg("energy_threshold") = 0.95);
    m.def("quantize_int8", &quantize_int8, py::arg("model"),
          py::arg("calibration_inputs"));

    m.def("count_macc",
          py::overload_cast<const TinyFCModel&>(&count_macc), py::arg("model"));
    m.def("count_macc_int8",
          py::overload_cast<const QuantizedModel&>(&count_macc), py::arg("model"));
    m.def(
        "estimate_memory",
        [](const TinyFCModel& mm) {
            const MemoryEstimate e = estimate_memory(mm);
            return std::pair{e.weight_bytes, e.activation_bytes};
        },
        py::arg("model"));
    m.def(
        "estimate_memory_int8",
        [](const QuantizedModel& mm) {
            const MemoryEstimate e = estimate_memory(mm);
            return std::pair{e.weight_bytes, e.activation_bytes};
        },
        py::arg("model"));
    m.def(
        "bench_latency",
        [](const TinyFCModel& mm, int n_runs) {
            const LatencyStats s = bench_latency(mm, n_runs);
            py::dict d;
            d["min_us"] = s.min_us;
            d["median_us"] = s.median_us;
            d["p99_us"] = s.p99_us;
            d["inner_iterations"] = s.inner_iterations;
            return d;
        },
        py::arg("model"), py::arg("n_runs") = 300);

    m.def(
        "compute_metrics",
        [](const SimTrace& trace, double band, std::size_t min_len,
           double transient_exclusion) {
            const LoopMetrics mm =
                compute_metrics(trace, {band, min_len, transient_exclusion});
            py::dict d;
            d["max_deviation"] = mm.max_deviation;
            d["avg_deviation"] = mm.avg_deviation;
            d["max_overshoot"] = mm.max_overshoot
                                     ? py::object(py::float_(*mm.max_overshoot))
                                     : py::object(py::none());
            return d;
        },
        py::arg("trace"), py::arg("band") = 0.03, py::arg("min_len") = 150,
        py::arg("transient_exclusion") = 0.010);

    m.def("mse", &mse, py::arg("gt"), py::arg("pred"));
    m.def("plot_trace", &plot_trace, py::arg("trace"), py::arg("path"));

    m.def(
        "run_experiment",
        [](const std::string& config_path, const std::filesystem::path& out_dir) {
            const ExperimentConfig cfg = config_path.empty()
                                             ? default_case1_config()
                                             : load_config(config_path);
            const ExperimentResult res = run_experiment(cfg, out_dir);
            py::dict d;
            for (const auto& [name, mm] : res.metrics) {
                py::dict e;
                e["max_deviation"] = mm.max_deviation;
                e["avg_deviation"] = mm.avg_deviation;
                e["max_overshoot"] =
                    mm.max_overshoot ? py::object(py::float_(*mm.max_overshoot))
                                     : py::object(py::none());
                d[py::str(name)] = e;
            }
            return d;
        },
        py::arg("config_path") = "", py::arg("out_dir") = "out",
        "Full pipeline; returns the per-controller loop metrics");
}
