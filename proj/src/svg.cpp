#include "cyclereg/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "cyclereg/report.hpp"

namespace cyclereg {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

struct Extent {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double pad = 0.04 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

}  // namespace

std::string render_scatter_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
  const double left = 64, right = 24, top = 40, bottom = 52;
  const double pw = spec.width - left - right;
  const double ph = spec.height - top - bottom;
  Extent ex, ey;
  for (const auto& s : series) {
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      ex.add(s.x[i]);
      ey.add(s.y[i]);
    }
  }
  ex.finish();
  ey.finish();
  auto sx = [&](double v) { return left + (v - ex.lo) / (ex.hi - ex.lo) * pw; };
  auto sy = [&](double v) { return top + ph - (v - ey.lo) / (ey.hi - ey.lo) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
    << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(spec.width / 2.0) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(spec.title) << "</text>\n";
  o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double fx = ex.lo + (ex.hi - ex.lo) * k / 5.0;
    const double fy = ey.lo + (ey.hi - ey.lo) * k / 5.0;
    o << "<line x1=\"" << num(sx(fx)) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(sx(fx)) << "\" y2=\""
      << num(top + ph + 5) << "\" stroke=\"#333\"/>";
    o << "<text x=\"" << num(sx(fx)) << "\" y=\"" << num(top + ph + 18) << "\" text-anchor=\"middle\">" << tick(fx)
      << "</text>\n";
    o << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(sy(fy)) << "\" x2=\"" << num(left) << "\" y2=\""
      << num(sy(fy)) << "\" stroke=\"#333\"/>";
    o << "<text x=\"" << num(left - 8) << "\" y=\"" << num(sy(fy) + 4) << "\" text-anchor=\"end\">" << tick(fy)
      << "</text>\n";
  }
  o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(spec.height - 12.0)
    << "\" text-anchor=\"middle\">" << escape(spec.x_label) << "</text>\n";
  o << "<text transform=\"translate(16 " << num(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(spec.y_label) << "</text>\n";
  for (const auto& s : series) {
    o << "<g fill=\"" << escape(s.color) << "\" fill-opacity=\"0.6\">\n";
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      o << "<circle cx=\"" << num(sx(s.x[i])) << "\" cy=\"" << num(sy(s.y[i])) << "\" r=\"2\"/>\n";
    }
    o << "</g>\n";
  }
  double ly = top + 14;
  for (const auto& s : series) {
    o << "<circle cx=\"" << num(left + 14) << "\" cy=\"" << num(ly - 4) << "\" r=\"4\" fill=\"" << escape(s.color)
      << "\"/><text x=\"" << num(left + 24) << "\" y=\"" << num(ly) << "\">" << escape(s.label) << "</text>\n";
    ly += 16;
  }
  o << "</svg>\n";
  return o.str();
}

void write_scatter_svg(const std::filesystem::path& path, const PlotSpec& spec,
                       const std::vector<PlotSeries>& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << render_scatter_svg(spec, series);
  if (!out) throw IoError("failed writing: " + path.string());
}

}  // namespace cyclereg
