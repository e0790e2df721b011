#include "bartlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bartlab/common.hpp"

namespace bartlab {

namespace {

constexpr int kMarginLeft = 64;
constexpr int kMarginRight = 168;
constexpr int kMarginTop = 44;
constexpr int kMarginBottom = 54;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

// Fixed two-decimal pixel coordinates keep the output byte-stable.
std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

Range padded(double lo, double hi) {
  if (hi < lo) std::swap(lo, hi);
  if (hi == lo) {
    const double d = std::max(1.0, std::abs(hi)) * 0.1;
    lo -= d;
    hi += d;
  }
  const double pad = (hi - lo) * 0.06;
  return {lo - pad, hi + pad};
}

// Tick step rounded to 1, 2, or 5 times a power of ten.
double nice_step(double span, int target) {
  const double raw = span / std::max(1, target);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  double factor = 10.0;
  if (norm <= 1.0)
    factor = 1.0;
  else if (norm <= 2.0)
    factor = 2.0;
  else if (norm <= 5.0)
    factor = 5.0;
  return factor * mag;
}

std::vector<double> ticks(const Range& range, int target = 5) {
  const double step = nice_step(range.hi - range.lo, target);
  std::vector<double> out;
  double t = std::ceil(range.lo / step) * step;
  for (; t <= range.hi + step * 1e-9; t += step) {
    // Snap near-zero ticks so "-0" never appears.
    out.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  }
  return out;
}

void validate_plot(const SvgPlot& plot) {
  if (plot.series.empty()) throw ConfigError("svg: plot needs >= 1 series");
  if (plot.width < 200 || plot.height < 160)
    throw ConfigError("svg: canvas must be at least 200 x 160");
  for (const auto& s : plot.series) {
    if (s.x.empty()) throw ConfigError("svg: series '" + s.label + "' is empty");
    if (s.x.size() != s.y.size())
      throw ConfigError("svg: series '" + s.label + "' has mismatched x/y");
    if (!s.err.empty() && s.err.size() != s.x.size())
      throw ConfigError("svg: series '" + s.label +
                        "' has mismatched error bars");
    for (size_t i = 0; i < s.x.size(); ++i) {
      const double e = s.err.empty() ? 0.0 : s.err[i];
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) ||
          !std::isfinite(e) || e < 0.0)
        throw ConfigError("svg: series '" + s.label +
                          "' has a non-finite or negative entry");
    }
  }
}

}  // namespace

std::string xml_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      case '\'':
        out += "&apos;";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

std::string render_svg(const SvgPlot& plot) {
  validate_plot(plot);

  double x_lo = plot.series[0].x[0];
  double x_hi = x_lo;
  double y_lo = plot.series[0].y[0];
  double y_hi = y_lo;
  for (const auto& s : plot.series) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      const double e = s.err.empty() ? 0.0 : s.err[i];
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i] - e);
      y_hi = std::max(y_hi, s.y[i] + e);
    }
  }
  const Range xr = padded(x_lo, x_hi);
  const Range yr = padded(y_lo, y_hi);

  const double pw = plot.width - kMarginLeft - kMarginRight;
  const double ph = plot.height - kMarginTop - kMarginBottom;
  const auto sx = [&](double x) {
    return kMarginLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw;
  };
  const auto sy = [&](double y) {
    return kMarginTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph;
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << plot.width
     << "\" height=\"" << plot.height << "\" viewBox=\"0 0 " << plot.width
     << " " << plot.height << "\">\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << plot.width << "\" height=\""
     << plot.height << "\" fill=\"#ffffff\"/>\n";
  os << "  <text x=\"" << px(plot.width / 2.0)
     << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"15\" font-weight=\"bold\">"
     << xml_escape(plot.title) << "</text>\n";

  // Grid and tick labels.
  os << "  <g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
  for (const double t : ticks(xr)) {
    const double X = sx(t);
    os << "    <line x1=\"" << px(X) << "\" y1=\"" << px(kMarginTop)
       << "\" x2=\"" << px(X) << "\" y2=\"" << px(kMarginTop + ph)
       << "\" stroke=\"#e3e3e3\" stroke-width=\"1\"/>\n";
    os << "    <text x=\"" << px(X) << "\" y=\"" << px(kMarginTop + ph + 16)
       << "\" text-anchor=\"middle\">" << xml_escape(tick_text(t))
       << "</text>\n";
  }
  for (const double t : ticks(yr)) {
    const double Y = sy(t);
    os << "    <line x1=\"" << px(kMarginLeft) << "\" y1=\"" << px(Y)
       << "\" x2=\"" << px(kMarginLeft + pw) << "\" y2=\"" << px(Y)
       << "\" stroke=\"#e3e3e3\" stroke-width=\"1\"/>\n";
    os << "    <text x=\"" << px(kMarginLeft - 7) << "\" y=\"" << px(Y + 4)
       << "\" text-anchor=\"end\">" << xml_escape(tick_text(t))
       << "</text>\n";
  }
  os << "  </g>\n";

  os << "  <rect x=\"" << px(kMarginLeft) << "\" y=\"" << px(kMarginTop)
     << "\" width=\"" << px(pw) << "\" height=\"" << px(ph)
     << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  os << "  <text x=\"" << px(kMarginLeft + pw / 2.0) << "\" y=\""
     << px(plot.height - 14)
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"12\">"
     << xml_escape(plot.x_label) << "</text>\n";
  os << "  <text x=\"18\" y=\"" << px(kMarginTop + ph / 2.0)
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"12\" transform=\"rotate(-90 18 "
     << px(kMarginTop + ph / 2.0) << ")\">" << xml_escape(plot.y_label)
     << "</text>\n";

  for (size_t si = 0; si < plot.series.size(); ++si) {
    const auto& s = plot.series[si];
    const char* color = kPalette[si % kPaletteSize];
    os << "  <g stroke=\"" << color << "\" fill=\"none\">\n";
    if (!s.err.empty()) {
      for (size_t i = 0; i < s.x.size(); ++i) {
        if (s.err[i] <= 0.0) continue;
        const double X = sx(s.x[i]);
        const double Y0 = sy(s.y[i] - s.err[i]);
        const double Y1 = sy(s.y[i] + s.err[i]);
        os << "    <line x1=\"" << px(X) << "\" y1=\"" << px(Y0) << "\" x2=\""
           << px(X) << "\" y2=\"" << px(Y1) << "\" stroke-width=\"1\"/>\n";
        for (const double Y : {Y0, Y1})
          os << "    <line x1=\"" << px(X - 3.5) << "\" y1=\"" << px(Y)
             << "\" x2=\"" << px(X + 3.5) << "\" y2=\"" << px(Y)
             << "\" stroke-width=\"1\"/>\n";
      }
    }
    os << "    <polyline stroke-width=\"1.6\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (i) os << " ";
      os << px(sx(s.x[i])) << "," << px(sy(s.y[i]));
    }
    os << "\"/>\n";
    os << "  </g>\n";
    os << "  <g fill=\"" << color << "\" stroke=\"none\">\n";
    for (size_t i = 0; i < s.x.size(); ++i)
      os << "    <circle cx=\"" << px(sx(s.x[i])) << "\" cy=\""
         << px(sy(s.y[i])) << "\" r=\"2.6\"/>\n";
    os << "  </g>\n";
  }

  // Legend, one entry per series.
  const double lx = plot.width - kMarginRight + 14;
  os << "  <g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (size_t si = 0; si < plot.series.size(); ++si) {
    const double ly = kMarginTop + 10 + 19.0 * static_cast<double>(si);
    os << "    <line x1=\"" << px(lx) << "\" y1=\"" << px(ly) << "\" x2=\""
       << px(lx + 22) << "\" y2=\"" << px(ly) << "\" stroke=\""
       << kPalette[si % kPaletteSize] << "\" stroke-width=\"2\"/>\n";
    os << "    <text x=\"" << px(lx + 28) << "\" y=\"" << px(ly + 4) << "\">"
       << xml_escape(plot.series[si].label) << "</text>\n";
  }
  os << "  </g>\n";
  os << "</svg>\n";
  return os.str();
}

void write_svg(const std::string& path, const SvgPlot& plot) {
  const std::string body = render_svg(plot);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("svg: cannot open '" + path + "' for writing");
  out << body;
  if (!out) throw ConfigError("svg: failed writing '" + path + "'");
}

}  // namespace bartlab
