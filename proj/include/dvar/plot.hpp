#pragma once

#include <string>
#include <vector>

namespace dvar::plot {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct Panel {
    std::string title;
    std::vector<Series> series;
};

/// Renders a grid of line-chart panels as a standalone SVG document. Output
/// bytes are a pure function of the input (fixed palette, fixed-precision
/// coordinates), so identical inputs render byte-identical files.
std::string render_svg(const std::vector<Panel>& panels, std::size_t columns = 1);

void write_svg(const std::vector<Panel>& panels, const std::string& path,
               std::size_t columns = 1);

}  // namespace dvar::plot
