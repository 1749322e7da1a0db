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

// Published accuracy grid (percent) used as a rendering golden: six shot
// counts down, eight methods across in column order.

#include <array>
#include <cmath>
#include <string>

#include "lowshot/bench.hpp"

namespace lowshot::testing {

inline constexpr std::array<int, 6> kReferenceShots = {5120, 639, 79, 40, 20, 10};

inline constexpr std::array<std::array<const char*, 8>, 6> kReferenceCells = {{
    {"91.67", "84.62", "88.46", "91.03", "94.23", "87.82", "89.1", "89.74"},
    {"91.67", "84.62", "87.82", "91.03", "95.51", "87.82", "89.74", "89.74"},
    {"88.46", "82.05", "82.69", "87.18", "81.41", "83.97", "87.18", "88.46"},
    {"81.41", "82.69", "83.97", "88.46", "74.36", "83.33", "85.9", "87.18"},
    {"76.92", "75.64", "83.97", "82.69", "48.72", "83.33", "83.97", "87.82"},
    {"79.49", "78.85", "78.21", "83.97", "56.41", "77.56", "85.26", "83.33"},
}};

/// Every printed value is k/156 for an integer k; cells are loaded as those
/// exact counts.
inline constexpr int kReferenceTestSize = 156;

inline ResultMatrix reference_matrix() {
  ResultMatrix m;
  m.schedule.shots_per_class.assign(kReferenceShots.begin(), kReferenceShots.end());
  m.schedule.seeds = {0};
  for (const auto& name : method_order()) m.methods.push_back(default_method(name));
  for (std::size_t r = 0; r < kReferenceShots.size(); ++r) {
    for (std::size_t c = 0; c < 8; ++c) {
      ResultCell cell;
      cell.method = method_order()[c];
      cell.shots = kReferenceShots[r];
      cell.seed = 0;
      cell.n_test = kReferenceTestSize;
      cell.n_correct = static_cast<int>(std::lround(std::stod(kReferenceCells[r][c]) * kReferenceTestSize / 100.0));
      cell.accuracy = static_cast<double>(cell.n_correct) / cell.n_test;
      m.cells.push_back(cell);
    }
  }
  m.complete = true;
  return m;
}

}  // namespace lowshot::testing
