#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <variant>
#include <vector>

#include "foclab/trace.hpp"

namespace foclab {

// Maximal run of steps where the reference is constant and the measured speed
// stays within the detection band. Step bounds are inclusive.
struct SteadyInterval {
    std::uint64_t start_step = 0;
    std::uint64_t end_step = 0;
    double reference_value = 0.0;
};

// One training row: the three model inputs plus the manufactured correction
// target. The target stores the correction to ADD to iq_pi, i.e. adjusted
// minus raw, so that applying it reproduces the rectified signal.
struct DatasetRecord {
    double omega_ref = 0.0;
    double omega_meas = 0.0;
    double iq_pi = 0.0;
    double delta_iq_gt = 0.0;
};

// Saturation rectification: clamps the magnitude of a quadrature-current
// sample to c, keeping its sign (braking samples stay braking).
double saturate_threshold(double x, double c);

// Exponential rectification between two anchor values:
//   x_adj(t) = x_final + (x_initial - x_final) * exp(-t / tau)
double exp_rectify(double x_initial, double x_final, double t, double tau);

// Maximal runs with constant reference and |omega_meas - omega_ref| <= band,
// at least min_len steps long. Empty trace gives an empty list.
std::vector<SteadyInterval> detect_steady_intervals(const SimTrace& trace,
                                                    double band,
                                                    std::size_t min_len);

// Threshold rectification. Without an explicit c, each steady interval is
// clamped at 1.1x the magnitude of its final quadrature-current value.
struct ThresholdMethod {
    std::optional<double> c;
};

// Exponential rectification between each steady interval's endpoint values.
struct RectifyMethod {
    double tau = 5e-3;
};

using GtMethod = std::variant<ThresholdMethod, RectifyMethod>;

struct GtConfig {
    GtMethod method = ThresholdMethod{};
    double band = 0.04;        // per-unit speed
    std::size_t min_len = 60;  // steps

    void validate() const;
};

// Manufactures the training targets from a PI-only trace: inside each steady
// interval the quadrature current is rectified by the chosen method; outside,
// the adjusted signal equals the raw signal and the target is zero. One
// record per trace row.
//
// Throws DomainError if the trace carries corrector output (not PI-only) and
// ConfigError when no steady interval is found (suggesting band/min_len
// adjustment).
std::vector<DatasetRecord> make_ground_truth(const SimTrace& trace,
                                             const GtConfig& cfg);

// CSV with the exact header: omega_ref,omega_meas,iq_pi,delta_iq_gt
void write_dataset_csv(const std::vector<DatasetRecord>& rows, std::ostream& out);
void write_dataset_csv(const std::vector<DatasetRecord>& rows,
                       const std::filesystem::path& path);
std::vector<DatasetRecord> read_dataset_csv(std::istream& in);
std::vector<DatasetRecord> read_dataset_csv(const std::filesystem::path& path);

}  // namespace foclab
