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

#include "lowshot/dataset.hpp"
#include "lowshot/raster.hpp"

namespace lowshot {

/// Number of distinct shape families the generator knows.
inline constexpr int kNumShapeKinds = 10;

/// One size x size image of shape family `kind` (disk, ring, filled square,
/// square outline, horizontal stripes, vertical stripes, diagonal bar, plus,
/// triangle, blob pair) with random placement, scale, colors and noise.
Raster render_shape(int kind, int size, std::uint64_t seed);

/// Labeled dataset of rendered shapes, `per_class` images for each of the
/// first `num_classes` shape kinds. Ids are "<class>/<index>.png".
LabeledDataset make_shape_dataset(int num_classes, int per_class, int size, std::uint64_t seed);

/// Writes a dataset in the `<root>/<class>/<file>` ingestion layout as PNGs.
void write_dataset_tree(const LabeledDataset& ds, const std::string& root);

}  // namespace lowshot
