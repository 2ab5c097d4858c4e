#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace spectral_slam {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool scatter = false;  // markers instead of a polyline
  std::string color = "#1f77b4";
};

struct PlotOptions {
  std::string title;
  std::string x_label = "x";
  std::string y_label = "y";
  bool equal_aspect = false;
  bool log_x = false;
  bool log_y = false;
  int width = 640;
  int height = 480;
};

std::string render_svg(const std::vector<PlotSeries>& series, const PlotOptions& options);

// Long-format CSV `series,x,y` of every plotted point.
std::string series_csv(const std::vector<PlotSeries>& series);

// Writes <stem>.svg and <stem>.csv into `directory`.
void write_plot(const std::filesystem::path& directory, const std::string& stem,
                const std::vector<PlotSeries>& series, const PlotOptions& options);

}  // namespace spectral_slam
