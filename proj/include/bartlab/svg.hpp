#pragma once

#include <string>
#include <vector>

namespace bartlab {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // error-bar half-width per point; empty for none
};

struct SvgPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<SvgSeries> series;
  int width = 720;
  int height = 480;
};

std::string xml_escape(const std::string& text);

// Deterministic hand-emitted line chart: axes with nice ticks, one polyline
// with markers per series, vertical error bars, and a legend. The same plot
// always renders to the same bytes.
std::string render_svg(const SvgPlot& plot);

void write_svg(const std::string& path, const SvgPlot& plot);

}  // namespace bartlab
