// Copyright 2026 The lowshot Authors
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

// Accuracy-versus-shots chart rendered straight into an RGB raster.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "lowshot/bench.hpp"
#include "lowshot/common.hpp"
#include "lowshot/raster.hpp"

namespace lowshot {

namespace {

using Rgb = std::array<std::uint8_t, 3>;

/// 5x7 glyphs, one byte per row, bit 4 = leftmost column.
struct Glyph {
  char ch;
  std::array<std::uint8_t, 7> rows;
};

constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}}, {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}}, {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}}, {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
};

constexpr Rgb kPalette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},
                            {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127}};

class Canvas {
 public:
  Canvas(int h, int w) : img_(h, w, 255) {}

  void put(int x, int y, const Rgb& c) {
    if (x < 0 || y < 0 || x >= img_.width || y >= img_.height) return;
    for (int k = 0; k < 3; ++k) img_.at(y, x, k) = c[static_cast<std::size_t>(k)];
  }

  void fill_rect(int x0, int y0, int x1, int y1, const Rgb& c) {
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) put(x, y, c);
    }
  }

  /// Bresenham line, `thick` pixels wide.
  void line(int x0, int y0, int x1, int y1, const Rgb& c, int thick = 1) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      fill_rect(x0 - thick / 2, y0 - thick / 2, x0 + (thick - 1) / 2, y0 + (thick - 1) / 2, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  /// Top-left anchored text; unknown characters render as blanks.
  void text(int x, int y, std::string_view s, const Rgb& c) {
    for (char raw : s) {
      const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
      for (const Glyph& g : kFont) {
        if (g.ch != ch) continue;
        for (int r = 0; r < 7; ++r) {
          for (int col = 0; col < 5; ++col) {
            if (g.rows[static_cast<std::size_t>(r)] & (0x10 >> col)) put(x + col, y + r, c);
          }
        }
      }
      x += 6;
    }
  }

  static int text_width(std::string_view s) { return static_cast<int>(s.size()) * 6 - 1; }

  const Raster& raster() const { return img_; }

 private:
  Raster img_;
};

struct Curve {
  std::string method;
  std::vector<std::pair<int, double>> points;  // (shots, percent), ascending shots
};

std::vector<Curve> curves_of(const ResultMatrix& m) {
  if (!(m.complete && m.has_all_cells())) {
    throw RunError("cannot plot an incomplete result matrix" + (m.failure.empty() ? "" : ": " + m.failure));
  }
  std::vector<std::string> names;
  for (const auto& spec : m.methods) names.push_back(spec.name);
  std::sort(names.begin(), names.end(),
            [](const auto& a, const auto& b) { return method_rank(a) < method_rank(b); });
  std::vector<int> shots = m.schedule.shots_per_class;
  std::sort(shots.begin(), shots.end());
  std::vector<Curve> out;
  for (const auto& name : names) {
    Curve c{name, {}};
    for (int n : shots) c.points.emplace_back(n, *m.mean_accuracy(name, n) * 100.0);
    out.push_back(std::move(c));
  }
  return out;
}

std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string render_curve_data(const ResultMatrix& m) {
  std::ostringstream out;
  out << "method,shots,accuracy\n";
  for (const auto& c : curves_of(m)) {
    for (const auto& [n, y] : c.points) {
      out << (c.method.find(',') == std::string::npos ? c.method : '"' + c.method + '"') << ','
          << n << ',' << format_g(y) << '\n';
    }
  }
  return out.str();
}

void plot_curves(const ResultMatrix& m, const std::string& png_path, const std::string& data_path) {
  const std::vector<Curve> curves = curves_of(m);
  constexpr int kW = 760, kH = 480;
  constexpr int kLeft = 56, kRight = 180, kTop = 28, kBottom = 52;
  const int px0 = kLeft, px1 = kW - kRight, py0 = kTop, py1 = kH - kBottom;

  const auto [lo_it, hi_it] = std::minmax_element(m.schedule.shots_per_class.begin(),
                                                  m.schedule.shots_per_class.end());
  double lx0 = std::log10(static_cast<double>(*lo_it));
  double lx1 = std::log10(static_cast<double>(*hi_it));
  if (lx1 - lx0 < 1e-9) {
    lx0 -= 0.5;
    lx1 += 0.5;
  }
  const auto xmap = [&](double shots) {
    return px0 + static_cast<int>(std::lround((std::log10(shots) - lx0) / (lx1 - lx0) * (px1 - px0)));
  };
  const auto ymap = [&](double pct) {
    return py1 - static_cast<int>(std::lround(std::clamp(pct, 0.0, 100.0) / 100.0 * (py1 - py0)));
  };

  Canvas cv(kH, kW);
  const Rgb grid{225, 225, 225}, axis{40, 40, 40};
  for (int y = 0; y <= 100; y += 20) {
    cv.line(px0, ymap(y), px1, ymap(y), grid);
    const std::string label = std::to_string(y);
    cv.text(px0 - 8 - Canvas::text_width(label), ymap(y) - 3, label, axis);
  }
  for (int n : m.schedule.shots_per_class) {
    const int x = xmap(n);
    cv.line(x, py0, x, py1, grid);
    cv.line(x, py1, x, py1 + 4, axis);
    const std::string label = std::to_string(n);
    cv.text(x - Canvas::text_width(label) / 2, py1 + 8, label, axis);
  }
  cv.line(px0, py0, px0, py1, axis);
  cv.line(px0, py1, px1, py1, axis);
  cv.text((px0 + px1 - Canvas::text_width("SHOTS PER CLASS (LOG)")) / 2, kH - 18,
          "shots per class (log)", axis);
  cv.text(8, 8, "accuracy %", axis);

  for (std::size_t i = 0; i < curves.size(); ++i) {
    const Rgb& color = kPalette[method_rank(curves[i].method) % std::size(kPalette)];
    const auto& pts = curves[i].points;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      cv.line(xmap(pts[k].first), ymap(pts[k].second), xmap(pts[k + 1].first),
              ymap(pts[k + 1].second), color, 2);
    }
    for (const auto& [n, y] : pts) cv.fill_rect(xmap(n) - 2, ymap(y) - 2, xmap(n) + 2, ymap(y) + 2, color);
    const int ly = py0 + 6 + static_cast<int>(i) * 16;
    cv.line(px1 + 14, ly + 3, px1 + 34, ly + 3, color, 2);
    cv.text(px1 + 40, ly, curves[i].method, axis);
  }

  write_png(png_path, cv.raster());
  write_text_file(data_path, render_curve_data(m));
}

}  // namespace lowshot
