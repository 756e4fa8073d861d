#pragma once

namespace foclab {

struct PIGains {
    double kp = 0.0;
    double ki = 0.0;       // per second
    double out_min = 0.0;
    double out_max = 0.0;

    void validate() const;  // kp, ki >= 0 and out_min < out_max
};

// Discrete PI with backward-Euler integration and conditional anti-windup:
// the integrator is frozen on steps where the output is saturated and the
// error would push it further into saturation.
class PIController {
  public:
    PIController() = default;
    explicit PIController(const PIGains& gains) : gains_(gains) {
        gains_.validate();
    }

    // u = clamp(kp*e + integrator), integrator += ki*e*dt unless frozen.
    // Throws DomainError on non-finite error ("controller fault").
    double step(double error, double dt);

    void reset() {
        integrator_ = 0.0;
        last_saturated_ = false;
    }

    const PIGains& gains() const { return gains_; }
    double integrator() const { return integrator_; }
    bool last_saturated() const { return last_saturated_; }

  private:
    PIGains gains_;
    double integrator_ = 0.0;
    bool last_saturated_ = false;
};

}  // namespace foclab
