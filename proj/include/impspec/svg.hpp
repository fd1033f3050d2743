#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace impspec {

// One polyline with an optional shaded band around it (lo/hi aligned with x;
// leave them empty for no band).
struct SvgSeries {
  std::string label;
  std::string color;  // empty picks from the default palette
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  bool dashed = false;
};

struct SvgPlot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<SvgSeries> series;
  int width = 640;
  int height = 420;
};

std::string render_svg(const SvgPlot& plot);
void write_svg(const SvgPlot& plot, const std::string& path);

}  // namespace impspec
