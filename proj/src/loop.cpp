#include "foclab/loop.hpp"

#include <algorithm>
#include <cmath>

#include "foclab/errors.hpp"

namespace foclab {

void LoopConfig::validate() const {
    speed_gains.validate();
    id_gains.validate();
    iq_gains.validate();
    if (!(sample_time > 0.0) || sample_time > 1e-4) {
        throw ConfigError("loop: sample_time must be in (0, 1e-4]");
    }
    if (!(augment_scale > 0.0)) {
        throw ConfigError("loop: augment_scale must be > 0");
    }
}

LoopConfig default_loop_config() {
    LoopConfig cfg;
    cfg.speed_gains = {4.0, 8000.0, -5.0, 5.0};
    cfg.id_gains = {0.2262, 1382.3, -11.1, 11.1};
    cfg.iq_gains = {0.2262, 1382.3, -11.1, 11.1};
    return cfg;
}

SimTrace run_closed_loop(const ReferenceProfile& profile, const LoopConfig& cfg,
                         const MotorParams& plant, double duration) {
    cfg.validate();
    plant.validate();
    profile.validate();
    if (!(duration > 0.0)) throw ConfigError("loop: duration must be > 0");
    if (duration > profile.duration + 1e-12) {
        throw ConfigError("loop: profile does not cover the requested duration");
    }

    const double dt = cfg.sample_time;
    const auto n_steps = static_cast<std::uint64_t>(std::llround(duration / dt));

    PIController speed_pi(cfg.speed_gains);
    PIController id_pi(cfg.id_gains);
    PIController iq_pi_ctrl(cfg.iq_gains);

    MotorState state;
    const double base = plant.base_speed();
    const double i_max = plant.max_current;

    SimTrace trace;
    trace.sample_time = dt;
    trace.rows.reserve(n_steps + 1);

    for (std::uint64_t k = 0; k <= n_steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const double omega_ref = profile.eval(std::min(t, profile.duration));
        const double omega_meas = state.omega_mech / base;

        const double iq_pi = speed_pi.step(omega_ref - omega_meas, dt);
        const double delta_iq =
            cfg.augmentor
                ? cfg.augment_scale * cfg.augmentor(omega_ref, omega_meas, iq_pi)
                : 0.0;
        const double iq_adj = std::clamp(iq_pi + delta_iq, -i_max, i_max);

        const double v_d_cmd = id_pi.step(0.0 - state.i_d, dt);
        const double v_q_cmd = iq_pi_ctrl.step(iq_adj - state.i_q, dt);
        const DqVoltage v =
            saturate_voltage({v_d_cmd, v_q_cmd}, plant.nominal_voltage);

        trace.rows.push_back({k, omega_ref, omega_meas, iq_pi, delta_iq, iq_adj,
                              state.i_d, v.v_d, v.v_q});

        if (k == n_steps) break;
        state = step_motor(state, v, 0.0, dt, plant, k);
        // Ideal-inverter current limit; the plant ODE itself is unclamped.
        state.i_d = std::clamp(state.i_d, -i_max, i_max);
        state.i_q = std::clamp(state.i_q, -i_max, i_max);
    }
    return trace;
}

}  // namespace foclab
