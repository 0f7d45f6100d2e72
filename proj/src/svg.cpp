#include "pflab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pflab {

namespace {

constexpr double kWidth = 720.0, kHeight = 480.0;
constexpr double kMarginL = 80.0, kMarginR = 24.0, kMarginT = 40.0, kMarginB = 56.0;

std::string fmt(double v, const char *pattern = "%.2f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

std::string fmt_tick(double v) { return fmt(v, "%g"); }

// data value -> plotting coordinate on one axis (log10 when requested)
double transform(double v, bool log_axis) {
    if (!log_axis) return v;
    if (!(v > 0.0)) throw std::invalid_argument("log axis requires positive values");
    return std::log10(v);
}

struct AxisRange {
    double lo = 0.0, hi = 1.0;
};

AxisRange padded_range(std::vector<double> values) {
    AxisRange r;
    if (values.empty()) return r;
    r.lo = *std::min_element(values.begin(), values.end());
    r.hi = *std::max_element(values.begin(), values.end());
    if (r.hi - r.lo < 1e-12) {
        r.lo -= 0.5;
        r.hi += 0.5;
    } else {
        double pad = 0.04 * (r.hi - r.lo);
        r.lo -= pad;
        r.hi += pad;
    }
    return r;
}

std::vector<double> default_ticks(const std::vector<double> &values, bool log_axis) {
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end(),
                             [](double a, double b) { return std::abs(a - b) <= 1e-12 * (std::abs(a) + std::abs(b) + 1e-300); }),
                 sorted.end());
    if (sorted.size() >= 2 && sorted.size() <= 10) return sorted;
    if (sorted.empty()) return {};
    // too many distinct values: place 5 evenly spaced ticks in axis space
    double ulo = transform(sorted.front(), log_axis);
    double uhi = transform(sorted.back(), log_axis);
    std::vector<double> ticks;
    for (int i = 0; i <= 4; ++i) {
        double u = ulo + (uhi - ulo) * i / 4.0;
        ticks.push_back(log_axis ? std::pow(10.0, u) : u);
    }
    return ticks;
}

std::string escape_xml(const std::string &s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

std::string render_line_plot(const SvgPlotSpec &spec) {
    std::vector<double> xs, ys;
    for (const auto &s : spec.series)
        for (const auto &[x, y] : s.points) {
            xs.push_back(transform(x, spec.log_x));
            ys.push_back(transform(y, spec.log_y));
        }
    for (double t : spec.x_ticks) xs.push_back(transform(t, spec.log_x));
    for (double t : spec.y_ticks) ys.push_back(transform(t, spec.log_y));
    AxisRange xr = padded_range(xs), yr = padded_range(ys);

    const double plot_w = kWidth - kMarginL - kMarginR;
    const double plot_h = kHeight - kMarginT - kMarginB;
    auto px = [&](double x) {
        return kMarginL + (transform(x, spec.log_x) - xr.lo) / (xr.hi - xr.lo) * plot_w;
    };
    auto py = [&](double y) {
        return kMarginT + plot_h - (transform(y, spec.log_y) - yr.lo) / (yr.hi - yr.lo) * plot_h;
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    svg << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << escape_xml(spec.title)
        << "</text>\n";

    // axes
    double x0 = kMarginL, y0 = kMarginT + plot_h, x1 = kMarginL + plot_w, y1 = kMarginT;
    svg << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
        << "\" stroke=\"black\"/>\n";

    std::vector<double> xticks = spec.x_ticks, yticks = spec.y_ticks;
    if (xticks.empty()) {
        std::vector<double> raw;
        for (const auto &s : spec.series)
            for (const auto &[x, y] : s.points) raw.push_back(x);
        xticks = default_ticks(raw, spec.log_x);
    }
    if (yticks.empty()) {
        std::vector<double> raw;
        for (const auto &s : spec.series)
            for (const auto &[x, y] : s.points) raw.push_back(y);
        yticks = default_ticks(raw, spec.log_y);
    }
    for (double t : xticks) {
        double x = px(t);
        svg << "<line x1=\"" << fmt(x) << "\" y1=\"" << y0 << "\" x2=\"" << fmt(x) << "\" y2=\""
            << y0 + 5 << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << fmt(x) << "\" y=\"" << y0 + 20
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt_tick(t) << "</text>\n";
    }
    for (double t : yticks) {
        double y = py(t);
        svg << "<line x1=\"" << x0 - 5 << "\" y1=\"" << fmt(y) << "\" x2=\"" << x0 << "\" y2=\""
            << fmt(y) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << x0 - 8 << "\" y=\"" << fmt(y + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt_tick(t)
            << "</text>\n";
    }

    svg << "<text x=\"" << kMarginL + plot_w / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << escape_xml(spec.x_label) << "</text>\n";
    svg << "<text x=\"18\" y=\"" << kMarginT + plot_h / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 18 " << kMarginT + plot_h / 2 << ")\">"
        << escape_xml(spec.y_label) << "</text>\n";

    for (const auto &s : spec.series) {
        if (s.points.empty()) continue;
        std::ostringstream pts;
        for (const auto &[x, y] : s.points) pts << fmt(px(x)) << "," << fmt(py(y)) << " ";
        svg << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << s.color
            << "\" stroke-width=\"1.6\"";
        if (s.dashed) svg << " stroke-dasharray=\"6 4\"";
        svg << "/>\n";
        if (s.markers)
            for (const auto &[x, y] : s.points)
                svg << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y))
                    << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
    }

    // legend, top-right corner of the plot area
    double ly = kMarginT + 14;
    for (const auto &s : spec.series) {
        if (s.label.empty()) continue;
        double lx = kMarginL + plot_w - 150;
        svg << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 26 << "\" y2=\"" << ly
            << "\" stroke=\"" << s.color << "\" stroke-width=\"1.6\"";
        if (s.dashed) svg << " stroke-dasharray=\"6 4\"";
        svg << "/>\n";
        svg << "<text x=\"" << lx + 32 << "\" y=\"" << ly + 4
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape_xml(s.label)
            << "</text>\n";
        ly += 18;
    }

    svg << "</svg>\n";
    return svg.str();
}

void write_line_plot(const std::string &path, const SvgPlotSpec &spec) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write SVG file '" + path + "'");
    out << render_line_plot(spec);
}

} // namespace pflab
