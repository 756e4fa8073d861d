#include "foclab/pi.hpp"

#include <algorithm>
#include <cmath>

#include "foclab/errors.hpp"

namespace foclab {

void PIGains::validate() const {
    if (!(out_min < out_max)) throw ConfigError("PI gains: out_min must be < out_max");
    if (kp < 0.0 || ki < 0.0) throw ConfigError("PI gains: kp and ki must be >= 0");
    if (!std::isfinite(kp) || !std::isfinite(ki) || !std::isfinite(out_min) ||
        !std::isfinite(out_max)) {
        throw ConfigError("PI gains: non-finite value");
    }
}

double PIController::step(double error, double dt) {
    if (!std::isfinite(error)) throw DomainError("PI controller fault: non-finite error");
    if (!(dt > 0.0)) throw DomainError("PI controller: dt must be > 0");

    const double candidate = integrator_ + gains_.ki * error * dt;
    const double unclamped = gains_.kp * error + candidate;

    const bool high = unclamped > gains_.out_max;
    const bool low = unclamped < gains_.out_min;
    const bool pushes_further = (high && error > 0.0) || (low && error < 0.0);
    if (!pushes_further) {
        integrator_ = candidate;
    }

    const double u = gains_.kp * error + integrator_;
    const double out = std::clamp(u, gains_.out_min, gains_.out_max);
    last_saturated_ = (out != u) || high || low;
    return out;
}

}  // namespace foclab
