#include "nihigs/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "nihigs/io.hpp"

namespace nihigs {

namespace {

constexpr double kWidth = 900;
constexpr double kHeight = 520;
constexpr double kMarginLeft = 64;
constexpr double kMarginRight = 150;  // legend column
constexpr double kMarginTop = 40;
constexpr double kMarginBottom = 44;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// round a span to a 1/2/5 grid step
double nice_step(double span, int target_ticks) {
    const double raw = span / std::max(target_ticks, 1);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    if (r < 1.5) return mag;
    if (r < 3.5) return 2 * mag;
    if (r < 7.5) return 5 * mag;
    return 10 * mag;
}

}  // namespace

std::string trace_to_svg(const ClosedLoopTrace<double>& t, const std::string& title) {
    const Eigen::Index steps = t.steps();
    const Eigen::Index n = t.states.cols();
    const Eigen::Index series_count = n + 1;  // plant states plus x_tilde

    double lo = 0.0, hi = 0.0;
    if (steps > 0) {
        lo = std::min(t.states.minCoeff(), t.x_tilde.minCoeff());
        hi = std::max(t.states.maxCoeff(), t.x_tilde.maxCoeff());
    }
    if (hi - lo < 1e-12) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    const double kmax = static_cast<double>(std::max<Eigen::Index>(steps - 1, 1));
    const auto x_of = [&](double k) { return kMarginLeft + plot_w * k / kmax; };
    const auto y_of = [&](double v) {
        return kMarginTop + plot_h * (hi - v) / (hi - lo);
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kWidth << " "
       << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" "
       << "font-size=\"15\">" << title << "</text>\n";

    // axes box
    os << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\"" << plot_w
       << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";

    // horizontal grid and y labels
    const double ystep = nice_step(hi - lo, 6);
    for (double v = std::ceil(lo / ystep) * ystep; v <= hi + 1e-12; v += ystep) {
        const double y = y_of(v);
        os << "<line x1=\"" << kMarginLeft << "\" y1=\"" << num(y) << "\" x2=\""
           << kMarginLeft + plot_w << "\" y2=\"" << num(y)
           << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
        os << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << num(y + 4)
           << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
    }
    // x ticks
    const double xstep = nice_step(kmax, 8);
    for (double k = 0; k <= kmax + 1e-9; k += xstep) {
        const double x = x_of(k);
        os << "<line x1=\"" << num(x) << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
           << num(x) << "\" y2=\"" << kMarginTop + plot_h + 5
           << "\" stroke=\"#444\"/>\n";
        os << "<text x=\"" << num(x) << "\" y=\"" << kMarginTop + plot_h + 20
           << "\" text-anchor=\"middle\">" << num(k) << "</text>\n";
    }
    os << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 8
       << "\" text-anchor=\"middle\">k</text>\n";

    // one polyline per series
    for (Eigen::Index s = 0; s < series_count; ++s) {
        const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
        os << "<polyline fill=\"none\" stroke=\"" << color
           << "\" stroke-width=\"1.3\" points=\"";
        for (Eigen::Index k = 0; k < steps; ++k) {
            const double v = (s < n) ? t.states(k, s) : t.x_tilde(k);
            os << num(x_of(static_cast<double>(k))) << "," << num(y_of(v)) << " ";
        }
        os << "\"/>\n";
    }

    // legend
    const double lx = kMarginLeft + plot_w + 14;
    for (Eigen::Index s = 0; s < series_count; ++s) {
        const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
        const double ly = kMarginTop + 10 + 18 * static_cast<double>(s);
        os << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 22 << "\" y2=\""
           << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        std::string label = (s < n) ? ("x" + std::to_string(s + 1)) : "x_tilde";
        os << "<text x=\"" << lx + 28 << "\" y=\"" << ly + 4 << "\">" << label
           << "</text>\n";
    }

    os << "</svg>\n";
    return os.str();
}

void save_trace_svg(const std::string& path, const ClosedLoopTrace<double>& t,
                    const std::string& title) {
    atomic_write(path, trace_to_svg(t, title));
}

}  // namespace nihigs
