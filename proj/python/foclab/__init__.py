"""PMSM field-oriented control lab with a tiny learned current corrector."""

from ._core import (
    DEFAULT_BRANCH_WIDTHS,
    SAMPLE_TIME,
    FoclabConfigError,
    MotorParams,
    MotorState,
    QuantizedModel,
    ReferenceProfile,
    SimDivergedError,
    SimTrace,
    TinyFCModel,
    TrainDivergedError,
    bench_latency,
    build_tinyfc,
    case1_profile,
    case2_profile,
    compute_metrics,
    count_macc,
    count_macc_int8,
    count_transitions,
    estimate_memory,
    estimate_memory_int8,
    exp_rectify,
    inverse_park,
    load_model,
    load_qmodel,
    make_ground_truth,
    mse,
    park_transform,
    pca_prune,
    plot_trace,
    quantize_int8,
    read_trace_csv,
    run_experiment,
    saturate_threshold,
    saturate_voltage,
    save_model,
    save_qmodel,
    simulate,
    step_motor,
    train_on_trace,
    write_trace_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
