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

#include "lowshot/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "lowshot/common.hpp"

namespace lowshot {

void AugmentSpec::validate() const {
  if (!(min_crop_frac > 0.0 && min_crop_frac <= max_crop_frac && max_crop_frac <= 1.0)) {
    throw ConfigError("augment: crop fractions must satisfy 0 < min <= max <= 1");
  }
  if (out_height < 1 || out_width < 1) throw ConfigError("augment: output dims must be >= 1");
  if (brightness < 0 || contrast < 0 || saturation < 0 || hue < 0) {
    throw ConfigError("augment: jitter strengths must be >= 0");
  }
  if (hue > 0.5) throw ConfigError("augment: hue jitter must be <= 0.5");
}

namespace {

using Pixels = std::vector<std::array<double, 3>>;

double luma(const std::array<double, 3>& p) {
  return 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
}

void clamp_all(Pixels& px) {
  for (auto& p : px) {
    for (double& v : p) v = std::clamp(v, 0.0, 255.0);
  }
}

std::array<double, 3> rgb_to_hsv(const std::array<double, 3>& p) {
  const double r = p[0] / 255.0, g = p[1] / 255.0, b = p[2] / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  double h = 0.0;
  if (d > 0.0) {
    if (mx == r) {
      h = std::fmod((g - b) / d, 6.0);
    } else if (mx == g) {
      h = (b - r) / d + 2.0;
    } else {
      h = (r - g) / d + 4.0;
    }
    h /= 6.0;
    if (h < 0.0) h += 1.0;
  }
  const double s = mx > 0.0 ? d / mx : 0.0;
  return {h, s, mx};
}

std::array<double, 3> hsv_to_rgb(const std::array<double, 3>& hsv) {
  const double h = hsv[0] * 6.0;
  const double s = hsv[1];
  const double v = hsv[2];
  const double c = v * s;
  const double x = c * (1.0 - std::fabs(std::fmod(h, 2.0) - 1.0));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(std::floor(h)) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  return {(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0};
}

}  // namespace

Raster augment(const Raster& img, const AugmentSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (img.empty()) throw DataError("augment: empty raster");
  Rng rng(seed);

  const double area_frac = rng.uniform(spec.min_crop_frac, spec.max_crop_frac);
  double crop_h = img.height;
  double crop_w = img.width;
  double y0 = 0.0;
  double x0 = 0.0;
  // A full-area crop only exists at the image's own aspect ratio.
  if (area_frac < 1.0) {
    const double log_ratio = rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
    const double ratio = std::exp(log_ratio);
    crop_h = std::min(static_cast<double>(img.height), img.height * std::sqrt(area_frac / ratio));
    crop_w = std::min(static_cast<double>(img.width), img.width * std::sqrt(area_frac * ratio));
    y0 = rng.uniform(0.0, img.height - crop_h);
    x0 = rng.uniform(0.0, img.width - crop_w);
  }
  Raster out = crop_resize(img, y0, x0, crop_h, crop_w, spec.out_height, spec.out_width);

  const bool any_jitter =
      spec.brightness > 0 || spec.contrast > 0 || spec.saturation > 0 || spec.hue > 0;
  if (!any_jitter) return out;

  Pixels px(static_cast<std::size_t>(out.height) * out.width);
  for (std::size_t i = 0; i < px.size(); ++i) {
    for (int c = 0; c < 3; ++c) px[i][c] = out.pixels[i * 3 + c];
  }
  if (spec.brightness > 0) {
    const double f = rng.uniform(std::max(0.0, 1.0 - spec.brightness), 1.0 + spec.brightness);
    for (auto& p : px) {
      for (double& v : p) v *= f;
    }
    clamp_all(px);
  }
  if (spec.contrast > 0) {
    const double f = rng.uniform(std::max(0.0, 1.0 - spec.contrast), 1.0 + spec.contrast);
    double mean = 0.0;
    for (const auto& p : px) mean += luma(p);
    mean /= static_cast<double>(px.size());
    for (auto& p : px) {
      for (double& v : p) v = (v - mean) * f + mean;
    }
    clamp_all(px);
  }
  if (spec.saturation > 0) {
    const double f = rng.uniform(std::max(0.0, 1.0 - spec.saturation), 1.0 + spec.saturation);
    for (auto& p : px) {
      const double g = luma(p);
      for (double& v : p) v = (v - g) * f + g;
    }
    clamp_all(px);
  }
  if (spec.hue > 0) {
    const double shift = rng.uniform(-spec.hue, spec.hue);
    for (auto& p : px) {
      auto hsv = rgb_to_hsv(p);
      hsv[0] = std::fmod(hsv[0] + shift + 1.0, 1.0);
      p = hsv_to_rgb(hsv);
    }
    clamp_all(px);
  }
  for (std::size_t i = 0; i < px.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      out.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::lround(px[i][c]));
    }
  }
  return out;
}

}  // namespace lowshot
