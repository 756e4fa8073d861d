#include "foclab/motor.hpp"

#include <cmath>

#include "foclab/errors.hpp"

namespace foclab {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool all_finite(const MotorState& s) {
    return std::isfinite(s.i_d) && std::isfinite(s.i_q) &&
           std::isfinite(s.omega_mech) && std::isfinite(s.theta_elec);
}

// Plant derivative at a given state. Angle is advanced by the electrical
// speed; wrapping happens once per full step, not inside the stages.
struct Derivative {
    double di_d, di_q, domega, dtheta;
};

Derivative plant_derivative(const MotorState& s, const DqVoltage& v,
                            double load_torque, const MotorParams& p) {
    const double omega_e = p.pole_pairs * s.omega_mech;
    Derivative d;
    d.di_d = (v.v_d - p.stator_resistance * s.i_d +
              omega_e * p.q_inductance * s.i_q) /
             p.d_inductance;
    d.di_q = (v.v_q - p.stator_resistance * s.i_q -
              omega_e * (p.d_inductance * s.i_d + p.flux_linkage)) /
             p.q_inductance;
    const double torque =
        1.5 * p.pole_pairs *
        (p.flux_linkage * s.i_q +
         (p.d_inductance - p.q_inductance) * s.i_d * s.i_q);
    d.domega = (torque - load_torque - p.friction * s.omega_mech) / p.inertia;
    d.dtheta = omega_e;
    return d;
}

MotorState advance(const MotorState& s, const Derivative& d, double h) {
    MotorState out;
    out.i_d = s.i_d + h * d.di_d;
    out.i_q = s.i_q + h * d.di_q;
    out.omega_mech = s.omega_mech + h * d.domega;
    out.theta_elec = s.theta_elec + h * d.dtheta;
    return out;
}

}  // namespace

double MotorParams::base_speed() const { return max_speed * kTwoPi / 60.0; }

double MotorParams::torque_constant() const {
    return 1.5 * pole_pairs * flux_linkage;
}

void MotorParams::validate() const {
    if (pole_pairs < 1) throw ConfigError("pole_pairs must be >= 1");
    const double vals[] = {nominal_voltage, max_current,      max_speed,
                           stator_resistance, d_inductance,   q_inductance,
                           flux_linkage,      inertia,        friction};
    for (double v : vals) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError("motor parameters must be strictly positive and finite");
        }
    }
}

std::pair<double, double> park_transform(double alpha, double beta, double theta) {
    if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(theta)) {
        throw DomainError("park_transform: non-finite input");
    }
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {alpha * c + beta * s, -alpha * s + beta * c};
}

std::pair<double, double> inverse_park(double d, double q, double theta) {
    if (!std::isfinite(d) || !std::isfinite(q) || !std::isfinite(theta)) {
        throw DomainError("inverse_park: non-finite input");
    }
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {d * c - q * s, d * s + q * c};
}

DqVoltage saturate_voltage(const DqVoltage& v, double dc_bus) {
    if (!(dc_bus > 0.0)) throw DomainError("saturate_voltage: dc_bus must be > 0");
    const double mag = std::hypot(v.v_d, v.v_q);
    if (mag <= dc_bus || mag == 0.0) return v;
    const double k = dc_bus / mag;
    return {v.v_d * k, v.v_q * k};
}

MotorState step_motor(const MotorState& state, const DqVoltage& v,
                      double load_torque, double dt, const MotorParams& params,
                      std::uint64_t step_index) {
    if (!(dt > 0.0) || dt > 1e-4) {
        throw ConfigError("step_motor: dt must be in (0, 1e-4]");
    }
    if (!all_finite(state) || !std::isfinite(v.v_d) || !std::isfinite(v.v_q)) {
        throw SimDivergedError("step_motor: non-finite state or input", step_index);
    }

    const Derivative k1 = plant_derivative(state, v, load_torque, params);
    const Derivative k2 =
        plant_derivative(advance(state, k1, 0.5 * dt), v, load_torque, params);
    const Derivative k3 =
        plant_derivative(advance(state, k2, 0.5 * dt), v, load_torque, params);
    const Derivative k4 =
        plant_derivative(advance(state, k3, dt), v, load_torque, params);

    MotorState next;
    const double h = dt / 6.0;
    next.i_d = state.i_d + h * (k1.di_d + 2.0 * k2.di_d + 2.0 * k3.di_d + k4.di_d);
    next.i_q = state.i_q + h * (k1.di_q + 2.0 * k2.di_q + 2.0 * k3.di_q + k4.di_q);
    next.omega_mech =
        state.omega_mech +
        h * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega);
    next.theta_elec =
        state.theta_elec +
        h * (k1.dtheta + 2.0 * k2.dtheta + 2.0 * k3.dtheta + k4.dtheta);

    next.theta_elec = std::fmod(next.theta_elec, kTwoPi);
    if (next.theta_elec < 0.0) next.theta_elec += kTwoPi;

    if (!all_finite(next)) {
        throw SimDivergedError("step_motor: state diverged", step_index);
    }
    return next;
}

}  // namespace foclab
