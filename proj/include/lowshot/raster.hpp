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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lowshot {

/// H x W x 3 raster with 8-bit channels, row-major, channels interleaved.
struct Raster {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  Raster() = default;
  Raster(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, fill) {}

  bool empty() const { return height <= 0 || width <= 0; }

  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  bool operator==(const Raster&) const = default;
};

/// Bilinear resample of the rectangle [x0, x0+crop_w) x [y0, y0+crop_h)
/// (fractional pixel units) to out_h x out_w. Sample positions use pixel
/// centres, so an integer-aligned crop at unit scale reproduces its source
/// pixels exactly.
Raster crop_resize(const Raster& src, double y0, double x0, double crop_h, double crop_w,
                   int out_h, int out_w);

inline Raster resize_bilinear(const Raster& src, int out_h, int out_w) {
  return crop_resize(src, 0.0, 0.0, src.height, src.width, out_h, out_w);
}

/// Decode a PNG or JPEG file (detected by signature). Any decoder warning or
/// truncation is reported as a DataError naming the file.
Raster read_image(const std::string& path);

void write_png(const std::string& path, const Raster& img);

}  // namespace lowshot
