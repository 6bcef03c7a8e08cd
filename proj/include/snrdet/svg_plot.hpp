#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace snrdet {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool line = true;
  bool markers = false;
  std::string color = "#1f77b4";
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  std::optional<std::pair<double, double>> y_range;
  int width = 640;
  int height = 400;
};

/// Minimal standalone SVG line/scatter chart with axes, ticks and a legend.
std::string render_svg(const PlotSpec& plot);

}  // namespace snrdet
