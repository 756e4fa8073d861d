#pragma once

#include <cstdint>
#include <vector>

namespace foclab {

enum class SegmentKind { Step, Ramp };

// One reference-speed segment. A segment is active from start_time until the
// next segment begins (or the profile ends). Step segments hold their target;
// ramp segments interpolate linearly from the previous value to the target
// across the segment, reaching it at the segment end.
struct ProfileSegment {
    double start_time = 0.0;  // s
    SegmentKind kind = SegmentKind::Step;
    double target = 0.0;      // per-unit speed in [-1, 1]
};

// Piecewise reference-speed profile in per-unit of the rated speed.
struct ReferenceProfile {
    std::vector<ProfileSegment> segments;
    double duration = 0.0;  // s

    // Right-continuous evaluation; t must lie in [0, duration].
    double eval(double t) const;

    // Throws ConfigError when segment ordering/range invariants are broken.
    void validate() const;
};

// Amplitude alphabet used by both generated test profiles (per-unit).
inline constexpr double kProfileAmplitudes[] = {0.2, 0.35, 0.5, 0.65, 0.8};

// 10 s staircase with 2 step transitions per second (20 total). Consecutive
// targets always differ, so every segment is a real transition. Deterministic
// in the seed.
ReferenceProfile case1_profile(std::uint64_t seed);

// 10 s mix of steps and ramps with 10 transitions per second (100 total).
// Ramp slopes are bounded by the amplitude span over one 0.1 s segment.
ReferenceProfile case2_profile(std::uint64_t seed);

// Number of segments that actually change the reference (target differs from
// the value at the segment start).
int count_transitions(const ReferenceProfile& profile);

}  // namespace foclab
