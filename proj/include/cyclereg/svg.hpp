#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cyclereg {

struct PlotSeries {
  std::string label;
  std::string color;  // any SVG color
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 480;
};

/// Dependency-free SVG scatter plot with axes, ticks and a legend. Non-finite
/// points are skipped.
std::string render_scatter_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series);

void write_scatter_svg(const std::filesystem::path& path, const PlotSpec& spec,
                       const std::vector<PlotSeries>& series);

}  // namespace cyclereg
