#pragma once

#include <string>
#include <vector>

namespace geognn {

/// One polyline in a median-curve plot.
struct SvgSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal line plot (log-log when requested); returns the SVG document.
std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::string& y_label,
                          const std::vector<SvgSeries>& series, bool log_x = true,
                          bool log_y = true);

}  // namespace geognn
