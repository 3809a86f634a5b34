#include "flashsac/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "flashsac/common.hpp"

namespace flashsac {

namespace {

constexpr int kWidth = 800, kHeight = 480;
constexpr int kMarginLeft = 80, kMarginRight = 160, kMarginTop = 30,
              kMarginBottom = 55;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                         "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string render_line_chart(const std::vector<PlotSeries>& series,
                              const std::string& x_label,
                              const std::string& y_label) {
  if (series.empty()) throw UsageError("render_line_chart: no series");
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const auto& s : series) {
    if (s.x.empty() || s.x.size() != s.y.size())
      throw UsageError("render_line_chart: series '" + s.label +
                       "' is empty or ragged");
    for (double v : s.x) { x_min = std::min(x_min, v); x_max = std::max(x_max, v); }
    for (double v : s.y) { y_min = std::min(y_min, v); y_max = std::max(y_max, v); }
  }
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) { y_max += 1.0; y_min -= 1.0; }

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto px = [&](double x) {
    return kMarginLeft + (x - x_min) / (x_max - x_min) * plot_w;
  };
  auto py = [&](double y) {
    return kMarginTop + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
     << kHeight << "\">\n";
  os << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" fill=\"white\"/>\n";
  // axes
  os << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop + plot_h
     << "\" x2=\"" << kMarginLeft + plot_w << "\" y2=\"" << kMarginTop + plot_h
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\""
     << kMarginLeft << "\" y2=\"" << kMarginTop + plot_h
     << "\" stroke=\"black\"/>\n";
  // ticks
  const int n_ticks = 5;
  for (int i = 0; i <= n_ticks; ++i) {
    double fx = x_min + (x_max - x_min) * i / n_ticks;
    double gx = px(fx);
    os << "<line x1=\"" << gx << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
       << gx << "\" y2=\"" << kMarginTop + plot_h + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << gx << "\" y=\"" << kMarginTop + plot_h + 20
       << "\" font-size=\"11\" text-anchor=\"middle\">" << num(fx) << "</text>\n";
    double fy = y_min + (y_max - y_min) * i / n_ticks;
    double gy = py(fy);
    os << "<line x1=\"" << kMarginLeft - 5 << "\" y1=\"" << gy << "\" x2=\""
       << kMarginLeft << "\" y2=\"" << gy << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << gy + 4
       << "\" font-size=\"11\" text-anchor=\"end\">" << num(fy) << "</text>\n";
  }
  // axis labels
  os << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
     << "\" font-size=\"13\" text-anchor=\"middle\">" << x_label << "</text>\n";
  os << "<text x=\"18\" y=\"" << kMarginTop + plot_h / 2
     << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << kMarginTop + plot_h / 2 << ")\">" << y_label << "</text>\n";
  // series
  for (size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % (sizeof(kColors) / sizeof(kColors[0]))];
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\" points=\"";
    for (size_t k = 0; k < s.x.size(); ++k) {
      if (k) os << ' ';
      os << num(px(s.x[k])) << ',' << num(py(s.y[k]));
    }
    os << "\"/>\n";
    // legend
    double ly = kMarginTop + 14.0 + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << kMarginLeft + plot_w + 10 << "\" y1=\"" << ly
       << "\" x2=\"" << kMarginLeft + plot_w + 34 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << kMarginLeft + plot_w + 40 << "\" y=\"" << ly + 4
       << "\" font-size=\"12\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_line_chart(const std::string& path,
                      const std::vector<PlotSeries>& series,
                      const std::string& x_label, const std::string& y_label) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << render_line_chart(series, x_label, y_label);
  if (!os) throw IoError("write failed for '" + path + "'");
}

}  // namespace flashsac
