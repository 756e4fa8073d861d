#include "foclab/gt.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "foclab/errors.hpp"

namespace foclab {

double saturate_threshold(double x, double c) {
    if (!(c > 0.0)) throw DomainError("saturate_threshold: c must be > 0");
    const double mag = std::min(std::abs(x), c);
    return x < 0.0 ? -mag : mag;
}

double exp_rectify(double x_initial, double x_final, double t, double tau) {
    if (!(tau > 0.0)) throw ConfigError("exp_rectify: tau must be > 0");
    if (!(t >= 0.0)) throw DomainError("exp_rectify: t must be >= 0");
    return x_final + (x_initial - x_final) * std::exp(-t / tau);
}

std::vector<SteadyInterval> detect_steady_intervals(const SimTrace& trace,
                                                    double band,
                                                    std::size_t min_len) {
    if (!(band > 0.0)) throw ConfigError("detect_steady_intervals: band must be > 0");
    std::vector<SteadyInterval> out;
    const auto& rows = trace.rows;
    const std::size_t n = rows.size();
    std::size_t i = 0;
    while (i < n) {
        const double ref = rows[i].omega_ref;
        if (std::abs(rows[i].omega_meas - ref) > band) {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        while (j < n && rows[j].omega_ref == ref &&
               std::abs(rows[j].omega_meas - ref) <= band) {
            ++j;
        }
        if (j - i >= min_len) {
            out.push_back({rows[i].step, rows[j - 1].step, ref});
        }
        i = j;
    }
    return out;
}

void GtConfig::validate() const {
    if (!(band > 0.0)) throw ConfigError("gt: band must be > 0");
    if (min_len == 0) throw ConfigError("gt: min_len must be >= 1");
    if (const auto* th = std::get_if<ThresholdMethod>(&method)) {
        if (th->c && !(*th->c > 0.0)) throw ConfigError("gt: threshold c must be > 0");
    } else {
        if (!(std::get<RectifyMethod>(method).tau > 0.0)) {
            throw ConfigError("gt: rectify tau must be > 0");
        }
    }
}

std::vector<DatasetRecord> make_ground_truth(const SimTrace& trace,
                                             const GtConfig& cfg) {
    cfg.validate();
    const auto& rows = trace.rows;
    for (const TraceRow& r : rows) {
        if (r.delta_iq != 0.0) {
            throw DomainError("make_ground_truth: trace is not PI-only");
        }
    }

    std::vector<DatasetRecord> out;
    out.reserve(rows.size());
    for (const TraceRow& r : rows) {
        out.push_back({r.omega_ref, r.omega_meas, r.iq_pi, 0.0});
    }

    const auto intervals = detect_steady_intervals(trace, cfg.band, cfg.min_len);
    if (intervals.empty()) {
        throw ConfigError(
            "make_ground_truth: no steady intervals found; widen band or lower "
            "min_len");
    }

    // Row index of a given step (traces are contiguous from rows[0].step).
    const std::uint64_t step0 = rows.empty() ? 0 : rows[0].step;

    // Group the steady intervals by response interval (maximal constant-
    // reference segment). The anchor value of a response interval is the
    // quadrature current at its final in-band step: that is the settled
    // current the rectified signal is pinned to.
    std::size_t iv_idx = 0;
    std::size_t seg_start = 0;
    const std::size_t n = rows.size();
    for (std::size_t i = 1; i <= n; ++i) {
        if (i < n && rows[i].omega_ref == rows[seg_start].omega_ref) continue;

        std::vector<const SteadyInterval*> in_segment;
        while (iv_idx < intervals.size() &&
               intervals[iv_idx].end_step - step0 < i) {
            if (intervals[iv_idx].start_step - step0 >= seg_start) {
                in_segment.push_back(&intervals[iv_idx]);
            }
            ++iv_idx;
        }
        if (!in_segment.empty()) {
            const std::size_t anchor =
                static_cast<std::size_t>(in_segment.back()->end_step - step0);
            const double settled = rows[anchor].iq_pi;

            if (const auto* th = std::get_if<ThresholdMethod>(&cfg.method)) {
                const double c = th->c.value_or(1.1 * std::abs(settled));
                if (c > 0.0) {
                    for (const SteadyInterval* iv : in_segment) {
                        const auto lo = static_cast<std::size_t>(iv->start_step - step0);
                        const auto hi = static_cast<std::size_t>(iv->end_step - step0);
                        for (std::size_t k = lo; k <= hi; ++k) {
                            const double adj = saturate_threshold(rows[k].iq_pi, c);
                            out[k].delta_iq_gt = adj - rows[k].iq_pi;
                        }
                    }
                }
            } else {
                const double tau = std::get<RectifyMethod>(cfg.method).tau;
                for (const SteadyInterval* iv : in_segment) {
                    const auto lo = static_cast<std::size_t>(iv->start_step - step0);
                    const auto hi = static_cast<std::size_t>(iv->end_step - step0);
                    const double x_init = rows[lo].iq_pi;
                    for (std::size_t k = lo; k <= hi; ++k) {
                        const double t =
                            static_cast<double>(k - lo) * trace.sample_time;
                        const double adj = exp_rectify(x_init, settled, t, tau);
                        out[k].delta_iq_gt = adj - rows[k].iq_pi;
                    }
                }
            }
        }
        seg_start = i;
    }
    return out;
}

namespace {
constexpr const char* kDatasetHeader = "omega_ref,omega_meas,iq_pi,delta_iq_gt";
}

void write_dataset_csv(const std::vector<DatasetRecord>& rows, std::ostream& out) {
    out << kDatasetHeader << '\n';
    for (const DatasetRecord& r : rows) {
        out << format_double(r.omega_ref) << ',' << format_double(r.omega_meas)
            << ',' << format_double(r.iq_pi) << ','
            << format_double(r.delta_iq_gt) << '\n';
    }
}

void write_dataset_csv(const std::vector<DatasetRecord>& rows,
                       const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for writing: " + path.string());
    write_dataset_csv(rows, f);
    if (!f.good()) throw Error("write failed: " + path.string());
}

std::vector<DatasetRecord> read_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kDatasetHeader) {
        throw Error("dataset CSV: missing or unexpected header");
    }
    std::vector<DatasetRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        double vals[4];
        for (int i = 0; i < 4; ++i) {
            if (!std::getline(ss, field, ',')) throw Error("dataset CSV: short row");
            vals[i] = std::stod(field);
        }
        out.push_back({vals[0], vals[1], vals[2], vals[3]});
    }
    return out;
}

std::vector<DatasetRecord> read_dataset_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for reading: " + path.string());
    return read_dataset_csv(f);
}

}  // namespace foclab
