#include "dvar/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "dvar/common.hpp"

namespace dvar::plot {

namespace {

constexpr double panel_width = 420.0;
constexpr double panel_height = 260.0;
constexpr double margin_left = 58.0;
constexpr double margin_right = 14.0;
constexpr double margin_top = 26.0;
constexpr double margin_bottom = 36.0;

constexpr std::size_t palette_size = 6;
const char* const palette[palette_size] = {"#1f77b4", "#d62728", "#2ca02c",
                                           "#9467bd", "#ff7f0e", "#17becf"};

std::string coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

Range data_range(const std::vector<Series>& series, bool horizontal) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const Series& s : series) {
        const std::vector<double>& v = horizontal ? s.x : s.y;
        for (const double x : v) {
            if (std::isfinite(x)) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
        }
    }
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
        return {0.0, 1.0};
    }
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    return {lo, hi};
}

void render_panel(std::ostringstream& out, const Panel& panel, double ox, double oy) {
    const double plot_w = panel_width - margin_left - margin_right;
    const double plot_h = panel_height - margin_top - margin_bottom;
    const double x0 = ox + margin_left;
    const double y0 = oy + margin_top;
    const Range xr = data_range(panel.series, true);
    const Range yr = data_range(panel.series, false);
    const auto map_x = [&](double v) { return x0 + (v - xr.lo) / (xr.hi - xr.lo) * plot_w; };
    const auto map_y = [&](double v) {
        return y0 + plot_h - (v - yr.lo) / (yr.hi - yr.lo) * plot_h;
    };

    out << "<rect x=\"" << coord(x0) << "\" y=\"" << coord(y0) << "\" width=\"" << coord(plot_w)
        << "\" height=\"" << coord(plot_h)
        << "\" fill=\"none\" stroke=\"#888888\" stroke-width=\"1\"/>\n";
    if (!panel.title.empty()) {
        out << "<text x=\"" << coord(x0) << "\" y=\"" << coord(oy + 16.0)
            << "\" font-family=\"monospace\" font-size=\"12\">" << panel.title << "</text>\n";
    }
    for (int i = 0; i <= 4; ++i) {
        const double frac = static_cast<double>(i) / 4.0;
        const double xv = xr.lo + frac * (xr.hi - xr.lo);
        const double yv = yr.lo + frac * (yr.hi - yr.lo);
        const double xpix = x0 + frac * plot_w;
        const double ypix = y0 + plot_h - frac * plot_h;
        out << "<line x1=\"" << coord(xpix) << "\" y1=\"" << coord(y0 + plot_h) << "\" x2=\""
            << coord(xpix) << "\" y2=\"" << coord(y0 + plot_h + 4.0)
            << "\" stroke=\"#888888\" stroke-width=\"1\"/>\n";
        out << "<text x=\"" << coord(xpix) << "\" y=\"" << coord(y0 + plot_h + 16.0)
            << "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"middle\">"
            << tick_label(xv) << "</text>\n";
        out << "<line x1=\"" << coord(x0 - 4.0) << "\" y1=\"" << coord(ypix) << "\" x2=\""
            << coord(x0) << "\" y2=\"" << coord(ypix)
            << "\" stroke=\"#888888\" stroke-width=\"1\"/>\n";
        out << "<text x=\"" << coord(x0 - 6.0) << "\" y=\"" << coord(ypix + 3.0)
            << "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">"
            << tick_label(yv) << "</text>\n";
    }
    for (std::size_t si = 0; si < panel.series.size(); ++si) {
        const Series& s = panel.series[si];
        const char* color = palette[si % palette_size];
        out << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.2\" points=\"";
        const std::size_t n = std::min(s.x.size(), s.y.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                continue;
            }
            if (i > 0) {
                out << ' ';
            }
            out << coord(map_x(s.x[i])) << ',' << coord(map_y(s.y[i]));
        }
        out << "\"/>\n";
        // Legend entry.
        const double ly = y0 + 12.0 + 14.0 * static_cast<double>(si);
        out << "<line x1=\"" << coord(x0 + plot_w - 86.0) << "\" y1=\"" << coord(ly - 3.0)
            << "\" x2=\"" << coord(x0 + plot_w - 70.0) << "\" y2=\"" << coord(ly - 3.0)
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << coord(x0 + plot_w - 66.0) << "\" y=\"" << coord(ly)
            << "\" font-family=\"monospace\" font-size=\"10\">" << s.label << "</text>\n";
    }
}

}  // namespace

std::string render_svg(const std::vector<Panel>& panels, std::size_t columns) {
    if (panels.empty()) {
        throw ConfigError("nothing to plot");
    }
    columns = std::max<std::size_t>(1, std::min(columns, panels.size()));
    const std::size_t rows = (panels.size() + columns - 1) / columns;
    const double width = panel_width * static_cast<double>(columns);
    const double height = panel_height * static_cast<double>(rows);

    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << coord(width)
        << "\" height=\"" << coord(height) << "\" viewBox=\"0 0 " << coord(width) << ' '
        << coord(height) << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    for (std::size_t i = 0; i < panels.size(); ++i) {
        const double ox = panel_width * static_cast<double>(i % columns);
        const double oy = panel_height * static_cast<double>(i / columns);
        render_panel(out, panels[i], ox, oy);
    }
    out << "</svg>\n";
    return out.str();
}

void write_svg(const std::vector<Panel>& panels, const std::string& path, std::size_t columns) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write SVG file: " + path);
    }
    out << render_svg(panels, columns);
}

}  // namespace dvar::plot
