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

#include "lowshot/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>

#include "lowshot/common.hpp"

namespace lowshot {

namespace {

struct ShapeParams {
  double cx, cy, r, t, cos_a, sin_a, freq;
};

bool inside(int kind, const ShapeParams& p, double u, double v) {
  const double dx = u - p.cx;
  const double dy = v - p.cy;
  const double x = dx * p.cos_a + dy * p.sin_a;
  const double y = -dx * p.sin_a + dy * p.cos_a;
  const double d = std::hypot(dx, dy);
  switch (kind) {
    case 0: return d < p.r;
    case 1: return std::fabs(d - p.r) < p.t;
    case 2: return std::max(std::fabs(x), std::fabs(y)) < p.r;
    case 3: return std::fabs(std::max(std::fabs(x), std::fabs(y)) - p.r) < p.t;
    case 4:
      return std::fabs(dx) < p.r * 1.2 && std::fabs(dy) < p.r * 1.2 && std::sin(dy * p.freq) > 0.0;
    case 5:
      return std::fabs(dx) < p.r * 1.2 && std::fabs(dy) < p.r * 1.2 && std::sin(dx * p.freq) > 0.0;
    case 6: {
      const double along = (dx + dy) / std::sqrt(2.0);
      const double across = (dx - dy) / std::sqrt(2.0);
      return std::fabs(across) < p.t && std::fabs(along) < p.r * 1.3;
    }
    case 7:
      return (std::fabs(x) < p.t && std::fabs(y) < p.r) || (std::fabs(y) < p.t && std::fabs(x) < p.r);
    case 8: {
      // Equilateral triangle with circumradius r.
      std::array<double, 6> pts{};
      for (int k = 0; k < 3; ++k) {
        const double ang = -M_PI / 2 + 2.0 * M_PI * k / 3.0;
        pts[2 * k] = p.r * std::cos(ang);
        pts[2 * k + 1] = p.r * std::sin(ang);
      }
      bool pos = false, neg = false;
      for (int k = 0; k < 3; ++k) {
        const double ax = pts[2 * k], ay = pts[2 * k + 1];
        const double bx = pts[(2 * k + 2) % 6], by = pts[(2 * k + 3) % 6];
        const double cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax);
        pos = pos || cross > 0;
        neg = neg || cross < 0;
      }
      return !(pos && neg);
    }
    case 9: {
      const double off = p.r * 0.7;
      return std::hypot(x - off, y) < p.r * 0.5 || std::hypot(x + off, y) < p.r * 0.5;
    }
    default: throw Error("render_shape: unknown shape kind " + std::to_string(kind));
  }
}

double luma(const std::array<double, 3>& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

}  // namespace

Raster render_shape(int kind, int size, std::uint64_t seed) {
  if (kind < 0 || kind >= kNumShapeKinds) {
    throw Error("render_shape: unknown shape kind " + std::to_string(kind));
  }
  if (size < 4) throw Error("render_shape: size must be >= 4");
  Rng rng(seed);
  ShapeParams p{};
  p.cx = rng.uniform(0.35, 0.65);
  p.cy = rng.uniform(0.35, 0.65);
  p.r = rng.uniform(0.16, 0.3);
  p.t = std::max(rng.uniform(0.04, 0.08), 1.2 / size);
  const double angle = rng.uniform(0.0, M_PI / 2);
  p.cos_a = std::cos(angle);
  p.sin_a = std::sin(angle);
  p.freq = 2.0 * M_PI / std::max(rng.uniform(0.08, 0.14), 3.0 / size);

  std::array<double, 3> bg{}, fg{};
  do {
    for (int c = 0; c < 3; ++c) {
      bg[c] = rng.uniform(0.0, 255.0);
      fg[c] = rng.uniform(0.0, 255.0);
    }
  } while (std::fabs(luma(bg) - luma(fg)) < 80.0);

  Raster out(size, size);
  constexpr int kSub = 3;
  for (int py = 0; py < size; ++py) {
    for (int px = 0; px < size; ++px) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double u = (px + (sx + 0.5) / kSub) / size;
          const double v = (py + (sy + 0.5) / kSub) / size;
          hits += inside(kind, p, u, v) ? 1 : 0;
        }
      }
      const double cov = static_cast<double>(hits) / (kSub * kSub);
      for (int c = 0; c < 3; ++c) {
        const double val = cov * fg[c] + (1.0 - cov) * bg[c] + 6.0 * rng.normal();
        out.at(py, px, c) = static_cast<std::uint8_t>(std::clamp(std::lround(val), 0L, 255L));
      }
    }
  }
  return out;
}

LabeledDataset make_shape_dataset(int num_classes, int per_class, int size, std::uint64_t seed) {
  if (num_classes < 1 || num_classes > kNumShapeKinds) {
    throw Error("make_shape_dataset: num_classes must be in [1, " +
                std::to_string(kNumShapeKinds) + "]");
  }
  LabeledDataset ds;
  for (int c = 0; c < num_classes; ++c) ds.class_names.push_back("shape" + std::to_string(c));
  for (int c = 0; c < num_classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      ImageSample s;
      char name[32];
      std::snprintf(name, sizeof name, "%05d.png", i);
      s.class_name = ds.class_names[static_cast<std::size_t>(c)];
      s.id = s.class_name + "/" + name;
      s.label = c;
      s.pixels = render_shape(c, size, mix_seed(seed, static_cast<std::uint64_t>(c * 1000003 + i)));
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

void write_dataset_tree(const LabeledDataset& ds, const std::string& root) {
  namespace fs = std::filesystem;
  for (const auto& name : ds.class_names) fs::create_directories(fs::path(root) / name);
  for (const auto& s : ds.samples) write_png((fs::path(root) / s.id).string(), s.pixels);
}

}  // namespace lowshot
