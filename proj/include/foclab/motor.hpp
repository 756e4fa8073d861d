#pragma once

#include <cstdint>
#include <utility>

namespace foclab {

// Control / sampling period. The PWM runs at 30 kHz, so one step is exactly
// 1/30000 s; a 10 s run is 300000 steps and a trace holds 300001 rows.
inline constexpr double kSampleTime = 1.0 / 30000.0;

// Plant constants in the rotor (d-q) frame.
//
// Voltage, current, pole pairs and speed rating follow a BR2804-class drone
// motor. The electrical constants are not on the datasheet; the defaults are
// chosen so that the no-load speed at full bus voltage lands near the rated
// 19000 rpm, and so that the speed loop shows the step-response overshoot the
// corrector is meant to remove. All of them can be overridden from the
// experiment config.
struct MotorParams {
    double nominal_voltage = 11.1;   // V, DC bus
    double max_current = 5.0;        // A
    int pole_pairs = 7;
    double max_speed = 19000.0;      // rpm, rated speed (per-unit base)
    double stator_resistance = 0.11; // ohm
    double d_inductance = 1.8e-5;    // H
    double q_inductance = 1.8e-5;    // H
    double flux_linkage = 7.9e-4;    // Wb
    double inertia = 3.0e-7;         // kg m^2
    double friction = 5.0e-6;        // N m s / rad

    // Rated speed in mechanical rad/s (the per-unit speed base).
    double base_speed() const;
    // Electromagnetic torque per quadrature amp at i_d = 0.
    double torque_constant() const;

    // Throws ConfigError if any invariant is violated.
    void validate() const;
};

// Dynamic state. theta_elec is kept wrapped to [0, 2*pi) every step so the
// angle stays exact over multi-hundred-thousand step runs.
struct MotorState {
    double i_d = 0.0;        // A
    double i_q = 0.0;        // A
    double omega_mech = 0.0; // rad/s
    double theta_elec = 0.0; // rad, in [0, 2*pi)
};

struct DqVoltage {
    double v_d = 0.0;
    double v_q = 0.0;
};

// Rotation from the stationary alpha-beta frame into the rotor d-q frame:
//   d =  alpha*cos(theta) + beta*sin(theta)
//   q = -alpha*sin(theta) + beta*cos(theta)
// Throws DomainError on non-finite input.
std::pair<double, double> park_transform(double alpha, double beta, double theta);
std::pair<double, double> inverse_park(double d, double q, double theta);

// Clamps the voltage vector magnitude to dc_bus, preserving its angle.
DqVoltage saturate_voltage(const DqVoltage& v, double dc_bus);

// One fixed-step RK4 integration of the d-q plant equations:
//   di_d/dt = (v_d - R i_d + w_e L_q i_q) / L_d
//   di_q/dt = (v_q - R i_q - w_e (L_d i_d + psi)) / L_q
//   T_e     = 1.5 p (psi i_q + (L_d - L_q) i_d i_q)
//   dw/dt   = (T_e - T_load - B w) / J
//   dth_e/dt = p w
// dt must be in (0, 1e-4]; the step index is only used to label divergence
// errors.
MotorState step_motor(const MotorState& state, const DqVoltage& v,
                      double load_torque, double dt, const MotorParams& params,
                      std::uint64_t step_index = 0);

}  // namespace foclab
