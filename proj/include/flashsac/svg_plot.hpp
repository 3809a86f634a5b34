#pragma once

#include <string>
#include <vector>

namespace flashsac {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Self-contained SVG line chart: one polyline per series, axes with tick
// labels and a legend. No external assets.
std::string render_line_chart(const std::vector<PlotSeries>& series,
                              const std::string& x_label,
                              const std::string& y_label);

void write_line_chart(const std::string& path,
                      const std::vector<PlotSeries>& series,
                      const std::string& x_label, const std::string& y_label);

}  // namespace flashsac
