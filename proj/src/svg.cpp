#include "foclab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "foclab/errors.hpp"

namespace foclab {

namespace {

constexpr int kWidth = 960;
constexpr int kPanelHeight = 280;
constexpr int kMarginLeft = 60;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 30;
constexpr int kPanelGap = 50;
constexpr std::size_t kMaxPoints = 2000;

struct Series {
    const char* label;
    const char* color;
    std::vector<double> y;
};

void render_panel(std::ostream& out, int top, const char* title, double t_max,
                  const std::vector<double>& t, const std::vector<Series>& series) {
    double lo = 1e300, hi = -1e300;
    for (const auto& s : series) {
        for (double v : s.y) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(hi > lo)) {
        hi = lo + 1.0;
        lo -= 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    const int plot_w = kWidth - kMarginLeft - kMarginRight;
    const int plot_h = kPanelHeight - 40;
    auto xpix = [&](double tv) {
        return kMarginLeft + plot_w * (tv / t_max);
    };
    auto ypix = [&](double v) {
        return top + plot_h - plot_h * ((v - lo) / (hi - lo));
    };

    out << "<text x=\"" << kMarginLeft << "\" y=\"" << top - 8
        << "\" font-size=\"14\" font-family=\"monospace\">" << title << "</text>\n";
    out << "<rect x=\"" << kMarginLeft << "\" y=\"" << top << "\" width=\""
        << plot_w << "\" height=\"" << plot_h
        << "\" fill=\"none\" stroke=\"#888\"/>\n";

    for (int g = 0; g <= 4; ++g) {
        const double v = lo + (hi - lo) * g / 4.0;
        out << "<text x=\"4\" y=\"" << format_double(ypix(v) + 4)
            << "\" font-size=\"11\" font-family=\"monospace\">"
            << format_double(std::round(v * 1000.0) / 1000.0) << "</text>\n";
    }
    for (int g = 0; g <= 5; ++g) {
        const double tv = t_max * g / 5.0;
        out << "<text x=\"" << format_double(xpix(tv) - 8) << "\" y=\""
            << top + plot_h + 16
            << "\" font-size=\"11\" font-family=\"monospace\">"
            << format_double(std::round(tv * 100.0) / 100.0) << "</text>\n";
    }

    int legend_x = kMarginLeft + 10;
    for (const auto& s : series) {
        out << "<polyline fill=\"none\" stroke=\"" << s.color
            << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            if (i) out << ' ';
            out << format_double(xpix(t[i])) << ',' << format_double(ypix(s.y[i]));
        }
        out << "\"/>\n";
        out << "<text x=\"" << legend_x << "\" y=\"" << top + 14
            << "\" font-size=\"12\" font-family=\"monospace\" fill=\"" << s.color
            << "\">" << s.label << "</text>\n";
        legend_x += 160;
    }
}

}  // namespace

void plot_trace(const SimTrace& trace, const std::filesystem::path& out_path) {
    if (trace.empty()) throw DomainError("plot_trace: empty trace");

    const std::size_t stride = std::max<std::size_t>(1, trace.size() / kMaxPoints);
    std::vector<double> t;
    Series ref{"omega_ref", "#1f77b4", {}};
    Series meas{"omega_meas", "#d62728", {}};
    Series iq_raw{"iq_pi", "#1f77b4", {}};
    Series iq_adj{"iq_adj", "#2ca02c", {}};
    for (std::size_t i = 0; i < trace.size(); i += stride) {
        const TraceRow& r = trace.rows[i];
        t.push_back(r.step * trace.sample_time);
        ref.y.push_back(r.omega_ref);
        meas.y.push_back(r.omega_meas);
        iq_raw.y.push_back(r.iq_pi);
        iq_adj.y.push_back(r.iq_adj);
    }
    const double t_max = std::max(t.back(), 1e-9);

    std::ostringstream body;
    const int height = kMarginTop + 2 * kPanelHeight + kPanelGap;
    body << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
         << "\" height=\"" << height << "\" viewBox=\"0 0 " << kWidth << ' '
         << height << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    render_panel(body, kMarginTop, "speed (per-unit)", t_max, t, {ref, meas});
    render_panel(body, kMarginTop + kPanelHeight + kPanelGap,
                 "quadrature current (A)", t_max, t, {iq_raw, iq_adj});
    body << "</svg>\n";

    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw Error("cannot open for writing: " + out_path.string());
    f << body.str();
    if (!f.good()) throw Error("write failed: " + out_path.string());
}

}  // namespace foclab
