#include "spectral_slam/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "spectral_slam/dataset.hpp"
#include "spectral_slam/error.hpp"

namespace spectral_slam {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

struct Range1 {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  }
};

}  // namespace

std::string render_svg(const std::vector<PlotSeries>& series, const PlotOptions& o) {
  auto tx = [&](double v) { return o.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return o.log_y ? std::log10(v) : v; };
  Range1 rx, ry;
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      rx.add(tx(s.x[i]));
      ry.add(ty(s.y[i]));
    }
  rx.finish();
  ry.finish();

  const double left = 70, right = 150, top = 40, bottom = 50;
  double pw = o.width - left - right, ph = o.height - top - bottom;
  double sx = pw / (rx.hi - rx.lo), sy = ph / (ry.hi - ry.lo);
  if (o.equal_aspect) sx = sy = std::min(sx, sy);
  auto px = [&](double v) { return left + (tx(v) - rx.lo) * sx; };
  auto py = [&](double v) { return top + ph - (ty(v) - ry.lo) * sy; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\"" << o.height
      << "\" viewBox=\"0 0 " << o.width << ' ' << o.height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << o.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(o.title)
      << "</text>\n";
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = rx.lo + (rx.hi - rx.lo) * k / 4.0, fy = ry.lo + (ry.hi - ry.lo) * k / 4.0;
    const double gx = left + (fx - rx.lo) * sx, gy = top + ph - (fy - ry.lo) * sy;
    svg << "<text x=\"" << fmt(gx) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
        << fmt(o.log_x ? std::pow(10.0, fx) : fx) << "</text>\n";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << fmt(gy + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
        << fmt(o.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
  }
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << o.height - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << escape(o.x_label) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << top + ph / 2 << ")\">" << escape(o.y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.scatter) {
      for (std::size_t i = 0; i < n; ++i)
        svg << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i])) << "\" r=\"3\" fill=\"" << s.color
            << "\"/>\n";
    } else if (n > 0) {
      svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < n; ++i) svg << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i])) << ' ';
      svg << "\"/>\n";
    }
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    svg << "<rect x=\"" << left + pw + 12 << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"10\" fill=\"" << s.color
        << "\"/>\n";
    svg << "<text x=\"" << left + pw + 30 << "\" y=\"" << ly << "\" font-size=\"12\">" << escape(s.name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string series_csv(const std::vector<PlotSeries>& series) {
  std::ostringstream out;
  out << "series,x,y\n";
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      out << s.name << ',' << format_double(s.x[i]) << ',' << format_double(s.y[i]) << '\n';
  return out.str();
}

void write_plot(const std::filesystem::path& dir, const std::string& stem, const std::vector<PlotSeries>& series,
                const PlotOptions& options) {
  std::ofstream svg(dir / (stem + ".svg"), std::ios::binary);
  std::ofstream csv(dir / (stem + ".csv"), std::ios::binary);
  if (!svg || !csv) fail(ErrorCode::IoError, "cannot write plot files in " + dir.string());
  svg << render_svg(series, options);
  csv << series_csv(series);
}

}  // namespace spectral_slam
