#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "internal.hpp"

namespace demux::cli::detail {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string header(double w, double h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) +
         "\" height=\"" + num(h) + "\" viewBox=\"0 0 " + num(w) + " " + num(h) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string polyline(const std::vector<std::pair<double, double>>& pts, const std::string& colour) {
  std::string s = "<polyline fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) s += (i ? " " : "") + num(pts[i].first) + "," + num(pts[i].second);
  return s + "\"/>\n";
}

std::string text(double x, double y, const std::string& body, const std::string& extra = "") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\"" + extra + ">" + body + "</text>\n";
}

}  // namespace

std::string saliency_svg(std::span<const double> x, const explain::SaliencyMap& map, std::size_t instance) {
  const double left = 90, right = 20, top = 30, plot_h = 200, band_h = 18, gap = 4;
  const double width = 820, plot_w = width - left - right;
  const double bands_top = top + plot_h + 20;
  const double height = bands_top + static_cast<double>(map.num_classes) * (band_h + gap) + 30;
  const std::size_t n = x.size();
  const double step = plot_w / static_cast<double>(std::max<std::size_t>(n, 1));

  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  double lo = *lo_it, hi = *hi_it;
  if (hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  auto sy = [&](double v) { return top + plot_h - (v - lo) / (hi - lo) * plot_h; };

  std::ostringstream os;
  os << header(width, height);
  os << text(left, 18, "instance " + std::to_string(instance) + ", predicted class " + std::to_string(map.target),
             " font-size=\"13\"");
  // predicted-class saliency shaded behind the series
  for (std::size_t t = 0; t < n; ++t) {
    const double v = map.at(map.target, t);
    if (v == 0.0) continue;
    os << "<rect x=\"" << num(left + t * step) << "\" y=\"" << num(top) << "\" width=\"" << num(step)
       << "\" height=\"" << num(plot_h) << "\" fill=\"" << (v > 0 ? "#d62728" : "#1f77b4")
       << "\" fill-opacity=\"" << num(0.35 * std::fabs(v)) << "\"/>\n";
  }
  os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(plot_w) << "\" height=\""
     << num(plot_h) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  std::vector<std::pair<double, double>> pts;
  for (std::size_t t = 0; t < n; ++t) pts.emplace_back(left + (t + 0.5) * step, sy(x[t]));
  os << polyline(pts, "black");
  os << text(left - 6, top + 4, num(hi), " text-anchor=\"end\"");
  os << text(left - 6, top + plot_h, num(lo), " text-anchor=\"end\"");

  for (std::size_t c = 0; c < map.num_classes; ++c) {
    const double y = bands_top + static_cast<double>(c) * (band_h + gap);
    const bool target = c == map.target;
    os << text(left - 6, y + band_h - 5, "class " + std::to_string(c),
               std::string(" text-anchor=\"end\"") + (target ? " font-weight=\"bold\"" : ""));
    for (std::size_t t = 0; t < n; ++t) {
      const double v = map.at(c, t);
      os << "<rect x=\"" << num(left + t * step) << "\" y=\"" << num(y) << "\" width=\"" << num(step)
         << "\" height=\"" << num(band_h) << "\" fill=\"" << (v >= 0 ? "#d62728" : "#1f77b4") << "\" fill-opacity=\""
         << num(std::fabs(v)) << "\"/>\n";
    }
    os << "<rect x=\"" << num(left) << "\" y=\"" << num(y) << "\" width=\"" << num(plot_w) << "\" height=\""
       << num(band_h) << "\" fill=\"none\" stroke=\"" << (target ? "black" : "#bbb") << "\" stroke-width=\""
       << (target ? "2" : "1") << "\"/>\n";
  }
  os << text(left, height - 10, "time step 0 to " + std::to_string(n ? n - 1 : 0) +
                                     "; red = positive saliency, blue = negative");
  os << "</svg>\n";
  return os.str();
}

std::string curves_svg(const eval::Curve& deletion, const eval::Curve& insertion, std::size_t target,
                       std::size_t instance) {
  const double left = 60, top = 30, w = 380, h = 260, width = 560, height = 340;
  auto px = [&](double f) { return left + f * w; };
  auto py = [&](double p) { return top + (1.0 - p) * h; };

  std::ostringstream os;
  os << header(width, height);
  os << text(left, 18, "instance " + std::to_string(instance) + ", class " + std::to_string(target),
             " font-size=\"13\"");
  os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = k / 4.0;
    os << text(left - 6, py(v) + 4, num(v), " text-anchor=\"end\"");
    os << text(px(v), top + h + 16, num(v), " text-anchor=\"middle\"");
  }
  os << text(left + w / 2, height - 10, "fraction of time steps", " text-anchor=\"middle\"");
  os << text(14, top + h / 2, "confidence", " transform=\"rotate(-90 14 " + num(top + h / 2) + ")\" text-anchor=\"middle\"");

  auto points = [&](const eval::Curve& c) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < c.fractions.size(); ++i) pts.emplace_back(px(c.fractions[i]), py(c.confidences[i]));
    return pts;
  };
  os << polyline(points(deletion), "#1f77b4");
  os << polyline(points(insertion), "#d62728");
  const double lx = left + w + 12;
  os << "<line x1=\"" << num(lx) << "\" y1=\"" << num(top + 10) << "\" x2=\"" << num(lx + 16) << "\" y2=\""
     << num(top + 10) << "\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
  os << text(lx + 20, top + 14, "deletion " + num(deletion.area()));
  os << "<line x1=\"" << num(lx) << "\" y1=\"" << num(top + 28) << "\" x2=\"" << num(lx + 16) << "\" y2=\""
     << num(top + 28) << "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
  os << text(lx + 20, top + 32, "insertion " + num(insertion.area()));
  os << text(lx, top + 52, "difference " + num(insertion.area() - deletion.area()));
  os << "</svg>\n";
  return os.str();
}

}  // namespace demux::cli::detail
