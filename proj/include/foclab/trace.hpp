#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace foclab {

// One control period of a closed-loop run. Speeds are per-unit, currents in
// amps, voltages in volts. The timestamp is derived from the step index so
// there is no accumulated float drift.
struct TraceRow {
    std::uint64_t step = 0;
    double omega_ref = 0.0;
    double omega_meas = 0.0;
    double iq_pi = 0.0;     // speed-loop PI output
    double delta_iq = 0.0;  // corrector contribution (0 without augmentor)
    double iq_adj = 0.0;    // commanded quadrature current after clamping
    double i_d = 0.0;
    double v_d = 0.0;
    double v_q = 0.0;
};

struct SimTrace {
    double sample_time = 0.0;
    std::vector<TraceRow> rows;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
    double time(std::size_t i) const { return rows[i].step * sample_time; }
};

// CSV with the exact header
//   step,t,omega_ref,omega_meas,iq_pi,delta_iq,iq_adj,id,vd,vq
// Doubles are written in shortest round-trip form, so write/read/write is
// byte-stable.
void write_trace_csv(const SimTrace& trace, std::ostream& out);
void write_trace_csv(const SimTrace& trace, const std::filesystem::path& path);
SimTrace read_trace_csv(std::istream& in);
SimTrace read_trace_csv(const std::filesystem::path& path);

// Shortest round-trip decimal form of a double (shared by the CSV, JSON and
// SVG writers).
std::string format_double(double value);

}  // namespace foclab
