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

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace lowshot {

/// Skin-tone categories ordered from lightest to darkest.
enum class SkinToneBin { very_light, light, intermediate, tan, brown, dark };

inline constexpr std::array<SkinToneBin, 6> kAllToneBins = {
    SkinToneBin::very_light, SkinToneBin::light, SkinToneBin::intermediate,
    SkinToneBin::tan,        SkinToneBin::brown, SkinToneBin::dark};

inline std::string_view to_string(SkinToneBin bin) {
  switch (bin) {
    case SkinToneBin::very_light: return "very_light";
    case SkinToneBin::light: return "light";
    case SkinToneBin::intermediate: return "intermediate";
    case SkinToneBin::tan: return "tan";
    case SkinToneBin::brown: return "brown";
    case SkinToneBin::dark: return "dark";
  }
  return "unknown";
}

inline std::optional<SkinToneBin> parse_tone_bin(std::string_view s) {
  for (SkinToneBin b : kAllToneBins) {
    if (to_string(b) == s) return b;
  }
  return std::nullopt;
}

}  // namespace lowshot
