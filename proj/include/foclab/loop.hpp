#pragma once

#include <functional>

#include "foclab/motor.hpp"
#include "foclab/pi.hpp"
#include "foclab/profile.hpp"
#include "foclab/trace.hpp"

namespace foclab {

// Optional corrector inserted into the speed loop. Inputs are the per-unit
// reference and measured speed plus the PI quadrature-current command; the
// output is in [-1, 1] and gets scaled by LoopConfig::augment_scale into amps.
using Augmentor = std::function<double(double omega_ref, double omega_meas,
                                       double iq_pi)>;

struct LoopConfig {
    PIGains speed_gains;  // per-unit speed error -> amps
    PIGains id_gains;     // amps error -> volts
    PIGains iq_gains;     // amps error -> volts
    double sample_time = kSampleTime;
    Augmentor augmentor;          // empty = plain PI control
    double augment_scale = 1.0;   // amps per unit of augmentor output

    void validate() const;
};

// Gains tuned against the default plant: the speed loop is deliberately
// underdamped so that step references produce the overshoot/ringing the
// corrector is trained to remove; the current loops are pole-cancellation
// designs (kp = L*wb, ki = R*wb at wb = 2*pi*2 kHz).
LoopConfig default_loop_config();

// Runs the cascaded FOC loop for `duration` seconds and records one row per
// control period (duration/sample_time steps, +1 row for the initial state).
//
// Per step: the speed PI turns the per-unit speed error into iq_pi; the
// corrector (when present) adds augment_scale * augmentor(...) and the sum is
// clamped to +/- max_current; the d-axis reference is identically zero; the
// current PIs produce (v_d, v_q), which is magnitude-saturated to the bus
// voltage and applied to the plant. Plant currents are clamped to the inverter
// current limit after each step.
//
// Throws SimDivergedError (carrying the step index) if the plant diverges.
SimTrace run_closed_loop(const ReferenceProfile& profile, const LoopConfig& cfg,
                         const MotorParams& plant, double duration);

}  // namespace foclab
