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

#include "lowshot/raster.hpp"

namespace lowshot {

/// Random resized crop followed by color jitter.
struct AugmentSpec {
  double min_crop_frac = 0.35;  // fraction of image area kept by the crop
  double max_crop_frac = 1.0;
  int out_height = 224;
  int out_width = 224;
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;  // fraction of a full hue turn, <= 0.5

  void validate() const;
};

/// Deterministic in (img, spec, seed). With zero jitter, a (1, 1) crop range
/// and an output size equal to the input size the result equals the input.
Raster augment(const Raster& img, const AugmentSpec& spec, std::uint64_t seed);

}  // namespace lowshot
