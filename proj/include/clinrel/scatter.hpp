#pragma once

// SVG scatter plots and CSV dumps for t-SNE embeddings.
//
// Colour encodes the class, fill encodes the source: real points are filled,
// synthetic points are hollow rings. Legend swatches are <rect> elements so
// the number of <circle> elements always equals the number of points.

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clinrel/error.hpp"
#include "clinrel/registry.hpp"
#include "clinrel/tsne.hpp"

namespace clinrel {

struct PointLabel {
  Source source = Source::Real;
  std::string class_label;
  friend bool operator==(const PointLabel&, const PointLabel&) = default;
};

namespace detail {

inline constexpr std::array<std::string_view, 8> kPalette = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e",
                                                            "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

inline std::string svg_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string xml_escape(std::string_view s) {
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

}  // namespace detail

inline std::string render_scatter(const TsneResult& result, const std::vector<PointLabel>& labels,
                                  std::string_view title = {}) {
  const std::size_t n = result.coords.size();
  if (n == 0) throw Error("cannot plot an empty embedding");
  if (labels.size() != n) {
    throw Error("label count " + std::to_string(labels.size()) + " does not match " + std::to_string(n) + " points");
  }

  std::set<std::string> class_set;
  std::set<std::pair<std::string, Source>> legend_set;
  for (const auto& l : labels) {
    class_set.insert(l.class_label);
    legend_set.emplace(l.class_label, l.source);
  }
  const std::vector<std::string> classes(class_set.begin(), class_set.end());
  auto colour = [&](const std::string& cls) {
    const auto idx = static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), cls) - classes.begin());
    return detail::kPalette[idx % detail::kPalette.size()];
  };

  const auto& c = result.coords;
  double min_x = c.x(0), max_x = c.x(0), min_y = c.y(0), max_y = c.y(0);
  for (std::size_t i = 1; i < n; ++i) {
    min_x = std::min(min_x, c.x(i));
    max_x = std::max(max_x, c.x(i));
    min_y = std::min(min_y, c.y(i));
    max_y = std::max(max_y, c.y(i));
  }
  double span_x = max_x - min_x;
  double span_y = max_y - min_y;
  if (span_x <= 0.0) span_x = 1.0;
  if (span_y <= 0.0) span_y = 1.0;
  const double vx = min_x - 0.05 * span_x;
  const double vy = min_y - 0.05 * span_y;
  const double vw = 1.1 * span_x;
  const double vh = 1.1 * span_y;
  const double radius = 0.006 * std::max(vw, vh);
  const double stroke = 0.3 * radius;

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"640\" height=\"640\" "
     << "preserveAspectRatio=\"xMidYMid meet\" viewBox=\"" << detail::svg_number(vx) << ' ' << detail::svg_number(vy)
     << ' ' << detail::svg_number(vw) << ' ' << detail::svg_number(vh) << "\">\n";
  if (!title.empty()) os << "<title>" << detail::xml_escape(title) << "</title>\n";
  os << "<rect x=\"" << detail::svg_number(vx) << "\" y=\"" << detail::svg_number(vy) << "\" width=\""
     << detail::svg_number(vw) << "\" height=\"" << detail::svg_number(vh) << "\" fill=\"white\"/>\n";

  os << "<g class=\"points\">\n";
  for (std::size_t i = 0; i < n; ++i) {
    const auto col = colour(labels[i].class_label);
    os << "<circle cx=\"" << detail::svg_number(c.x(i)) << "\" cy=\"" << detail::svg_number(c.y(i)) << "\" r=\""
       << detail::svg_number(radius) << "\" ";
    if (labels[i].source == Source::Real) {
      os << "fill=\"" << col << "\" fill-opacity=\"0.8\" stroke=\"none\"";
    } else {
      os << "fill=\"none\" stroke=\"" << col << "\" stroke-width=\"" << detail::svg_number(stroke) << "\"";
    }
    os << "/>\n";
  }
  os << "</g>\n";

  const double font = 0.03 * std::max(vw, vh);
  const double swatch = 0.025 * std::max(vw, vh);
  os << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"" << detail::svg_number(font) << "\">\n";
  double ly = vy + 1.5 * font;
  for (const auto& [cls, source] : legend_set) {
    const auto col = colour(cls);
    const double lx = vx + 0.5 * font;
    os << "<g class=\"legend-entry\"><rect x=\"" << detail::svg_number(lx) << "\" y=\""
       << detail::svg_number(ly - swatch) << "\" width=\"" << detail::svg_number(swatch) << "\" height=\""
       << detail::svg_number(swatch) << "\" ";
    if (source == Source::Real) {
      os << "fill=\"" << col << "\"";
    } else {
      os << "fill=\"none\" stroke=\"" << col << "\" stroke-width=\"" << detail::svg_number(stroke) << "\"";
    }
    os << "/><text x=\"" << detail::svg_number(lx + 1.5 * swatch) << "\" y=\"" << detail::svg_number(ly) << "\">"
       << (source == Source::Real ? "Real " : "Synthetic ") << detail::xml_escape(cls) << "</text></g>\n";
    ly += 1.4 * font;
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

// index,x,y,source,class
inline std::string coords_csv(const TsneResult& result, const std::vector<PointLabel>& labels) {
  if (labels.size() != result.coords.size()) throw Error("label count does not match point count");
  std::ostringstream os;
  os << "index,x,y,source,class\n";
  char buf[64];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    os << i;
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,", result.coords.x(i), result.coords.y(i));
    os << buf << to_string(labels[i].source) << ',' << labels[i].class_label << '\n';
  }
  return os.str();
}

// iter,kl (1-based iteration)
inline std::string kl_trace_csv(const TsneResult& result) {
  std::ostringstream os;
  os << "iter,kl\n";
  char buf[64];
  for (std::size_t t = 0; t < result.kl_trace.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", t + 1, result.kl_trace[t]);
    os << buf;
  }
  return os.str();
}

}  // namespace clinrel
