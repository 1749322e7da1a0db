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

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lowshot/raster.hpp"
#include "lowshot/skin_tone.hpp"

namespace lowshot {

/// CIE-Lab under D65.
struct Lab {
  double L = 0.0;
  double a = 0.0;
  double b = 0.0;
};

Lab srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Lower bounds (degrees) of the five upper bins; dark takes the rest.
/// Intervals are half-open and lower-inclusive.
struct ItaThresholds {
  double very_light = 55.0;
  double light = 41.0;
  double intermediate = 28.0;
  double tan = 10.0;
  double brown = -30.0;

  /// Strictly decreasing and inside (-90, 90).
  void validate() const;
};

nlohmann::json to_json(const ItaThresholds& t);
ItaThresholds ita_thresholds_from_json(const nlohmann::json& j);

SkinToneBin bin_ita(double ita_degrees, const ItaThresholds& t = {});

struct ToneEstimate {
  double ita_degrees = 0.0;  // in (-90, 90)
  SkinToneBin bin = SkinToneBin::very_light;
  int n_pixels_used = 0;
};

/// Median per-pixel ITA of the given Lab values. Pixels with b* = 0 have no
/// angle strictly inside (-90, 90) and are skipped.
ToneEstimate estimate_ita_lab(std::span<const Lab> pixels, const ItaThresholds& t = {});

/// Pixels as (row, column).
using PixelMask = std::vector<std::pair<int, int>>;

struct ItaOptions {
  ItaThresholds thresholds;
  /// Without a mask, the brightest fraction of pixels by L* is used.
  double bright_fraction = 0.2;
};

ToneEstimate estimate_ita(const Raster& img, const std::optional<PixelMask>& mask = std::nullopt,
                          const ItaOptions& opt = {});

struct BinMetrics {
  SkinToneBin bin = SkinToneBin::very_light;
  int n = 0;
  int n_correct = 0;
  double accuracy = 0.0;
  // Confusion counts for the positive class (binary tasks only).
  int tp = 0, fn = 0, fp = 0, tn = 0;
  std::optional<double> tpr;  // undefined without positives
  std::optional<double> fpr;  // undefined without negatives
  bool small_n = false;       // n < n_min; excluded from gaps
};

/// Largest pairwise difference over qualifying bins; undefined when fewer
/// than two bins define the metric.
struct SubgroupGaps {
  std::optional<double> accuracy;
  std::optional<double> tpr;
  std::optional<double> fpr;
};

struct SubgroupReport {
  std::vector<BinMetrics> bins;  // non-empty bins, lightest first
  int n = 0;
  double overall_accuracy = 0.0;
  bool binary = false;
  int positive_class = 1;
  int n_min = 5;
  SubgroupGaps gaps;
};

/// Per-bin metrics and gaps. TPR/FPR are reported when every label is 0 or 1,
/// with `positive_class` as the positive label.
SubgroupReport subgroup_report(const std::vector<int>& pred, const std::vector<int>& truth,
                               const std::vector<SkinToneBin>& bins, int n_min = 5,
                               int positive_class = 1);

nlohmann::json to_json(const SubgroupReport& r, const ItaThresholds& t);

/// bin,n,n_correct,accuracy,tpr,fpr,small_n rows followed by gap rows.
std::string render_audit_csv(const SubgroupReport& r);

}  // namespace lowshot
