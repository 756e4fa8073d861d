#include "foclab/profile.hpp"

#include <algorithm>
#include <cmath>

#include "foclab/errors.hpp"
#include "foclab/rng.hpp"

namespace foclab {

namespace {

constexpr std::size_t kAmplitudeCount =
    sizeof(kProfileAmplitudes) / sizeof(kProfileAmplitudes[0]);

// Value the profile holds at the end of segment i (== its target).
double segment_end_value(const ReferenceProfile& p, std::size_t i) {
    return p.segments[i].target;
}

// Value at the start of segment i: the previous segment's end, or 0 before
// the first one.
double segment_start_value(const ReferenceProfile& p, std::size_t i) {
    return i == 0 ? 0.0 : segment_end_value(p, i - 1);
}

double segment_end_time(const ReferenceProfile& p, std::size_t i) {
    return i + 1 < p.segments.size() ? p.segments[i + 1].start_time : p.duration;
}

}  // namespace

void ReferenceProfile::validate() const {
    if (!(duration > 0.0)) throw ConfigError("profile: duration must be > 0");
    if (segments.empty()) throw ConfigError("profile: needs at least one segment");
    if (segments.front().start_time != 0.0) {
        throw ConfigError("profile: first segment must start at t=0");
    }
    double prev = -1.0;
    for (const auto& s : segments) {
        if (!(s.start_time > prev)) {
            throw ConfigError("profile: segment start times must be strictly increasing");
        }
        if (s.start_time >= duration) {
            throw ConfigError("profile: segment starts past the end of the profile");
        }
        if (!(s.target >= -1.0 && s.target <= 1.0)) {
            throw ConfigError("profile: targets must be in [-1, 1] per-unit");
        }
        prev = s.start_time;
    }
}

double ReferenceProfile::eval(double t) const {
    if (!(t >= 0.0) || t > duration) {
        throw DomainError("profile eval: t outside [0, duration]");
    }
    // Last segment with start_time <= t.
    auto it = std::upper_bound(
        segments.begin(), segments.end(), t,
        [](double value, const ProfileSegment& s) { return value < s.start_time; });
    const std::size_t i = static_cast<std::size_t>(it - segments.begin()) - 1;
    const ProfileSegment& seg = segments[i];
    if (seg.kind == SegmentKind::Step) return seg.target;

    const double t0 = seg.start_time;
    const double t1 = segment_end_time(*this, i);
    const double v0 = segment_start_value(*this, i);
    if (t >= t1) return seg.target;
    const double frac = (t - t0) / (t1 - t0);
    return v0 + (seg.target - v0) * frac;
}

namespace {

// Draws a target index different from the previous one so that every segment
// is a genuine transition.
std::size_t next_amplitude_index(Rng& rng, std::size_t prev) {
    return (prev + 1 + rng.index(kAmplitudeCount - 1)) % kAmplitudeCount;
}

}  // namespace

ReferenceProfile case1_profile(std::uint64_t seed) {
    Rng rng(seed);
    ReferenceProfile p;
    p.duration = 10.0;
    std::size_t idx = rng.index(kAmplitudeCount);
    for (int k = 0; k < 20; ++k) {
        p.segments.push_back(
            {0.5 * k, SegmentKind::Step, kProfileAmplitudes[idx]});
        idx = next_amplitude_index(rng, idx);
    }
    p.validate();
    return p;
}

ReferenceProfile case2_profile(std::uint64_t seed) {
    Rng rng(seed);
    ReferenceProfile p;
    p.duration = 10.0;
    std::size_t idx = rng.index(kAmplitudeCount);
    for (int k = 0; k < 100; ++k) {
        const SegmentKind kind =
            rng.uniform() < 0.5 ? SegmentKind::Step : SegmentKind::Ramp;
        p.segments.push_back({0.1 * k, kind, kProfileAmplitudes[idx]});
        idx = next_amplitude_index(rng, idx);
    }
    p.validate();
    return p;
}

int count_transitions(const ReferenceProfile& profile) {
    int n = 0;
    for (std::size_t i = 0; i < profile.segments.size(); ++i) {
        if (profile.segments[i].target != segment_start_value(profile, i)) ++n;
    }
    return n;
}

}  // namespace foclab
