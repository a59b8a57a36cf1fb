#pragma once

#include <string>
#include <vector>

namespace expcli {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct PlotSpec {
  std::string title, x_label, y_label;
  bool log_x = false, log_y = false;
  std::vector<Series> series;
};

/// Renders a self-contained SVG line chart (axes, ticks, legend).
std::string render_svg(const PlotSpec& spec);

void write_svg(const std::string& path, const PlotSpec& spec);

}  // namespace expcli
