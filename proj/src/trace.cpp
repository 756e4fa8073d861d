#include "foclab/trace.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include "foclab/errors.hpp"

namespace foclab {

namespace {
constexpr const char* kHeader =
    "step,t,omega_ref,omega_meas,iq_pi,delta_iq,iq_adj,id,vd,vq";
}

std::string format_double(double value) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

void write_trace_csv(const SimTrace& trace, std::ostream& out) {
    out << kHeader << '\n';
    for (const TraceRow& r : trace.rows) {
        out << r.step << ',' << format_double(r.step * trace.sample_time) << ','
            << format_double(r.omega_ref) << ',' << format_double(r.omega_meas)
            << ',' << format_double(r.iq_pi) << ',' << format_double(r.delta_iq)
            << ',' << format_double(r.iq_adj) << ',' << format_double(r.i_d)
            << ',' << format_double(r.v_d) << ',' << format_double(r.v_q)
            << '\n';
    }
}

void write_trace_csv(const SimTrace& trace, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for writing: " + path.string());
    write_trace_csv(trace, f);
    if (!f.good()) throw Error("write failed: " + path.string());
}

SimTrace read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kHeader) {
        throw Error("trace CSV: missing or unexpected header");
    }
    SimTrace trace;
    double t0 = 0.0, t1 = 0.0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        double vals[10];
        for (int i = 0; i < 10; ++i) {
            if (!std::getline(ss, field, ',')) {
                throw Error("trace CSV: short row");
            }
            vals[i] = std::stod(field);
        }
        TraceRow r;
        r.step = static_cast<std::uint64_t>(vals[0]);
        r.omega_ref = vals[2];
        r.omega_meas = vals[3];
        r.iq_pi = vals[4];
        r.delta_iq = vals[5];
        r.iq_adj = vals[6];
        r.i_d = vals[7];
        r.v_d = vals[8];
        r.v_q = vals[9];
        if (trace.rows.empty()) t0 = vals[1];
        if (trace.rows.size() == 1) t1 = vals[1];
        trace.rows.push_back(r);
    }
    if (trace.rows.size() >= 2) {
        const auto dstep = trace.rows[1].step - trace.rows[0].step;
        trace.sample_time = dstep ? (t1 - t0) / static_cast<double>(dstep) : 0.0;
    }
    return trace;
}

SimTrace read_trace_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for reading: " + path.string());
    return read_trace_csv(f);
}

}  // namespace foclab
