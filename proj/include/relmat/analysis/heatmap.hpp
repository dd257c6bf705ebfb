// Copyright 2026 The relmat Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "relmat/error.hpp"

namespace relmat {

using Matrix = std::vector<std::vector<double>>;

inline std::string heatmap_csv(const Matrix& m, const std::vector<std::string>& labels) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (std::size_t a = 0; a < m.size(); ++a) {
    out << labels.at(a);
    for (double v : m[a]) {
      out << ',';
      if (!std::isnan(v)) out << v;
    }
    out << '\n';
  }
  return out.str();
}

namespace detail {

// Diverging red-white-blue scale over [-1, 1].
inline std::string diverging_color(double v) {
  if (std::isnan(v)) return "#cccccc";
  v = std::clamp(v, -1.0, 1.0);
  int r, g, b;
  if (v < 0) {
    const double t = -v;
    r = static_cast<int>(255 - t * (255 - 165));
    g = static_cast<int>(255 - t * 255);
    b = static_cast<int>(255 - t * (255 - 38));
  } else {
    const double t = v;
    r = static_cast<int>(255 - t * (255 - 49));
    g = static_cast<int>(255 - t * (255 - 54));
    b = static_cast<int>(255 - t * (255 - 149));
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

}  // namespace detail

/// Square-cell SVG heatmap; -1 renders as the darkest red.
inline std::string heatmap_svg(const Matrix& m, const std::vector<std::string>& labels) {
  const int cell = 36, margin = 140;
  const int n = static_cast<int>(m.size());
  const int size = margin + n * cell + 10;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int a = 0; a < n; ++a) {
    const auto name = detail::xml_escape(labels.at(static_cast<std::size_t>(a)));
    out << "<text x=\"" << margin - 4 << "\" y=\"" << margin + a * cell + cell / 2 + 4
        << "\" text-anchor=\"end\">" << name << "</text>\n";
    out << "<text transform=\"translate(" << margin + a * cell + cell / 2 + 4 << ","
        << margin - 4 << ") rotate(-60)\">" << name << "</text>\n";
    for (int b = 0; b < n; ++b) {
      const double v = m[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
      out << "<rect x=\"" << margin + b * cell << "\" y=\"" << margin + a * cell
          << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
          << detail::diverging_color(v) << "\" stroke=\"#ffffff\"/>\n";
      char txt[16];
      std::snprintf(txt, sizeof txt, "%.2f", v);
      out << "<text x=\"" << margin + b * cell + cell / 2 << "\" y=\""
          << margin + a * cell + cell / 2 + 4 << "\" text-anchor=\"middle\" font-size=\"9\">"
          << (std::isnan(v) ? "" : txt) << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << text;
  if (!f) throw IoError("write failed for '" + path + "'");
}

}  // namespace relmat
