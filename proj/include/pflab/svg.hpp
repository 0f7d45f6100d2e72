#pragma once

#include <string>
#include <utility>
#include <vector>

namespace pflab {

// One polyline on a plot. Coordinates are in data space; the writer applies
// the axis transforms. An empty label keeps the series out of the legend.
struct SvgSeries {
    std::vector<std::pair<double, double>> points;
    std::string color = "#1f6fb2";
    bool dashed = false;
    bool markers = true;
    std::string label;
};

struct SvgPlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    // explicit tick positions in data space; when empty, ticks are derived
    // from the union of series x (resp. y) values
    std::vector<double> x_ticks;
    std::vector<double> y_ticks;
    std::vector<SvgSeries> series;
};

// Renders a self-contained SVG document (no external references).
std::string render_line_plot(const SvgPlotSpec &spec);

void write_line_plot(const std::string &path, const SvgPlotSpec &spec);

} // namespace pflab
