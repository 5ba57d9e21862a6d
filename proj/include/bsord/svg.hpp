#pragma once

// Scatter plot of a 2-D embedding, one colour per ordinal state. Colours come
// from a sequential ramp so neighbouring states get neighbouring colours.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bsord/errors.hpp"

namespace bsord {

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  std::int64_t rank = 0;
};

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

struct SvgScatter {
  int width = 640;
  int height = 480;
  std::vector<ScatterPoint> points;
  /// Legend text per rank; falls back to the rank number.
  std::vector<std::string> class_names;
  std::int64_t k_states = 0;
  std::string title;
};

namespace detail {

struct Rgb {
  double r, g, b;
};

// Anchor colours of a perceptually ordered ramp (dark purple to yellow).
inline constexpr std::array<Rgb, 6> kRamp{{
    {68, 1, 84}, {65, 68, 135}, {42, 120, 142}, {34, 168, 132}, {122, 209, 81}, {253, 231, 37},
}};

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline Range padded_range(double lo, double hi) {
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace detail

/// Hex colour of `rank` among `k_states` ordered states.
inline std::string state_color(std::int64_t rank, std::int64_t k_states) {
  const double t = k_states <= 1 ? 0.0 : static_cast<double>(rank) / static_cast<double>(k_states - 1);
  const double pos = std::clamp(t, 0.0, 1.0) * static_cast<double>(detail::kRamp.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), detail::kRamp.size() - 2);
  const double f = pos - static_cast<double>(i);
  const auto& a = detail::kRamp[i];
  const auto& b = detail::kRamp[i + 1];
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(a.r + f * (b.r - a.r))),
                static_cast<int>(std::lround(a.g + f * (b.g - a.g))),
                static_cast<int>(std::lround(a.b + f * (b.b - a.b))));
  return buf;
}

inline std::string render_svg(const SvgScatter& plot) {
  if (plot.points.empty()) throw DataError("scatter plot needs at least one point");
  constexpr double kMarginLeft = 50, kMarginRight = 140, kMarginTop = 30, kMarginBottom = 40;
  const double w = plot.width;
  const double h = plot.height;
  const double plot_w = w - kMarginLeft - kMarginRight;
  const double plot_h = h - kMarginTop - kMarginBottom;

  auto [xmin, xmax] = std::minmax_element(plot.points.begin(), plot.points.end(),
                                          [](const auto& a, const auto& b) { return a.x < b.x; });
  auto [ymin, ymax] = std::minmax_element(plot.points.begin(), plot.points.end(),
                                          [](const auto& a, const auto& b) { return a.y < b.y; });
  const Range xr = detail::padded_range(xmin->x, xmax->x);
  const Range yr = detail::padded_range(ymin->y, ymax->y);
  auto sx = [&](double x) { return kMarginLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto sy = [&](double y) { return kMarginTop + (yr.hi - y) / (yr.hi - yr.lo) * plot_h; };
  const std::int64_t k = std::max<std::int64_t>(plot.k_states, 1);

  using detail::fmt;
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << plot.width << "\" height=\""
      << plot.height << "\" viewBox=\"0 0 " << plot.width << ' ' << plot.height << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << plot.width << "\" height=\"" << plot.height
      << "\" fill=\"white\"/>\n";
  if (!plot.title.empty()) {
    svg << "<text x=\"" << fmt(kMarginLeft) << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
        << detail::xml_escape(plot.title) << "</text>\n";
  }
  svg << "<rect x=\"" << fmt(kMarginLeft) << "\" y=\"" << fmt(kMarginTop) << "\" width=\""
      << fmt(plot_w) << "\" height=\"" << fmt(plot_h) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  svg << "<text x=\"" << fmt(kMarginLeft + plot_w / 2) << "\" y=\"" << fmt(h - 10)
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">component 1 ["
      << fmt(xr.lo) << ", " << fmt(xr.hi) << "]</text>\n";
  svg << "<text x=\"15\" y=\"" << fmt(kMarginTop + plot_h / 2)
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << fmt(kMarginTop + plot_h / 2) << ")\">component 2 [" << fmt(yr.lo) << ", " << fmt(yr.hi)
      << "]</text>\n";

  svg << "<g id=\"points\">\n";
  std::set<std::int64_t> present;
  for (const auto& p : plot.points) {
    present.insert(p.rank);
    svg << "<circle cx=\"" << fmt(sx(p.x)) << "\" cy=\"" << fmt(sy(p.y)) << "\" r=\"3\" fill=\""
        << state_color(p.rank, k) << "\" fill-opacity=\"0.8\"/>\n";
  }
  svg << "</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  double ly = kMarginTop + 10;
  for (auto rank : present) {
    const auto idx = static_cast<std::size_t>(rank);
    const std::string name = idx < plot.class_names.size() ? plot.class_names[idx] : std::to_string(rank);
    svg << "<rect x=\"" << fmt(w - kMarginRight + 15) << "\" y=\"" << fmt(ly - 9)
        << "\" width=\"10\" height=\"10\" fill=\"" << state_color(rank, k) << "\"/>"
        << "<text x=\"" << fmt(w - kMarginRight + 30) << "\" y=\"" << fmt(ly) << "\">"
        << detail::xml_escape(name) << "</text>\n";
    ly += 16;
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

}  // namespace bsord
