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

#include <gtest/gtest.h>

#include <cmath>

#include "lowshot/common.hpp"
#include "lowshot/fairness.hpp"

namespace {

using lowshot::Lab;
using lowshot::SkinToneBin;

std::vector<Lab> patch(double L, double a, double b, int n = 25) { return std::vector<Lab>(n, Lab{L, a, b}); }

TEST(Ita, UniformPatches) {
  const auto t45 = lowshot::estimate_ita_lab(patch(70, 3, 20));
  EXPECT_NEAR(t45.ita_degrees, 45.0, 1e-9);
  EXPECT_EQ(t45.n_pixels_used, 25);
  EXPECT_NEAR(lowshot::estimate_ita_lab(patch(50, 1, 17)).ita_degrees, 0.0, 1e-9);
  const auto pale = lowshot::estimate_ita_lab(patch(80, 0, 14));
  EXPECT_NEAR(pale.ita_degrees, std::atan(30.0 / 14.0) * 180.0 / M_PI, 1e-9);
  EXPECT_NEAR(pale.ita_degrees, 64.98, 5e-3);
  EXPECT_EQ(pale.bin, SkinToneBin::very_light);
}

TEST(Ita, MedianAndZeroChromaSkipped) {
  std::vector<Lab> px = {{70, 0, 20}, {50, 0, 10}, {80, 0, 14}, {90, 0, 0}};
  const auto t = lowshot::estimate_ita_lab(px);
  EXPECT_EQ(t.n_pixels_used, 3);
  EXPECT_NEAR(t.ita_degrees, 45.0, 1e-12);
  EXPECT_THROW(lowshot::estimate_ita_lab(patch(60, 0, 0)), lowshot::Error);
}

TEST(Ita, BinBoundariesAreLowerInclusive) {
  EXPECT_EQ(lowshot::bin_ita(55.0), SkinToneBin::very_light);
  EXPECT_EQ(lowshot::bin_ita(54.999), SkinToneBin::light);
  EXPECT_EQ(lowshot::bin_ita(41.0), SkinToneBin::light);
  EXPECT_EQ(lowshot::bin_ita(28.0), SkinToneBin::intermediate);
  EXPECT_EQ(lowshot::bin_ita(10.0), SkinToneBin::tan);
  EXPECT_EQ(lowshot::bin_ita(-30.0), SkinToneBin::brown);
  EXPECT_EQ(lowshot::bin_ita(-30.001), SkinToneBin::dark);
}

TEST(Ita, ThresholdsValidateAndRoundTrip) {
  lowshot::ItaThresholds t;
  EXPECT_NO_THROW(t.validate());
  t.light = 60;
  EXPECT_THROW(t.validate(), lowshot::ConfigError);
  const lowshot::ItaThresholds d;
  const auto back = lowshot::ita_thresholds_from_json(lowshot::to_json(d));
  EXPECT_EQ(back.tan, d.tan);
  EXPECT_THROW(lowshot::ita_thresholds_from_json({{"tann", 3}}), lowshot::ConfigError);
}

// Reference values computed with the CIE formulas at D65 (2 degree observer).
TEST(Lab, KnownConversions) {
  const Lab white = lowshot::srgb_to_lab(255, 255, 255);
  EXPECT_NEAR(white.L, 100.0, 1e-3);
  EXPECT_NEAR(white.a, 0.0, 1e-2);
  EXPECT_NEAR(white.b, 0.0, 1e-2);
  const Lab red = lowshot::srgb_to_lab(255, 0, 0);
  EXPECT_NEAR(red.L, 53.24, 1e-2);
  EXPECT_NEAR(red.a, 80.09, 1e-2);
  EXPECT_NEAR(red.b, 67.20, 1e-2);
  const Lab black = lowshot::srgb_to_lab(0, 0, 0);
  EXPECT_NEAR(black.L, 0.0, 1e-9);
}

TEST(Ita, RasterUsesMaskOrBrightestPixels) {
  lowshot::Raster img(10, 10, 0);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) {
      const bool skin = y < 2;  // top 20 pixels are bright skin
      img.at(y, x, 0) = skin ? 230 : 60;
      img.at(y, x, 1) = skin ? 190 : 40;
      img.at(y, x, 2) = skin ? 160 : 30;
    }
  const Lab skin = lowshot::srgb_to_lab(230, 190, 160);
  const double expected = std::atan((skin.L - 50.0) / skin.b) * 180.0 / M_PI;
  const auto est = lowshot::estimate_ita(img);
  EXPECT_EQ(est.n_pixels_used, 20);
  EXPECT_NEAR(est.ita_degrees, expected, 1e-9);

  const Lab dark = lowshot::srgb_to_lab(60, 40, 30);
  lowshot::PixelMask mask = {{5, 5}, {6, 6}, {7, 7}};
  const auto masked = lowshot::estimate_ita(img, mask);
  EXPECT_EQ(masked.n_pixels_used, 3);
  EXPECT_NEAR(masked.ita_degrees, std::atan((dark.L - 50.0) / dark.b) * 180.0 / M_PI, 1e-9);
}

TEST(Subgroup, HandCountedGap) {
  // Bin A: 9/10 correct, bin B: 6/10 correct.
  std::vector<int> truth(20, 1), pred(20, 1);
  std::vector<SkinToneBin> bins(20, SkinToneBin::light);
  for (int i = 10; i < 20; ++i) bins[i] = SkinToneBin::brown;
  pred[0] = 0;
  for (int i = 10; i < 14; ++i) pred[i] = 0;
  const auto r = lowshot::subgroup_report(pred, truth, bins);
  ASSERT_EQ(r.bins.size(), 2u);
  EXPECT_EQ(r.bins[0].bin, SkinToneBin::light);
  EXPECT_EQ(r.bins[0].n_correct, 9);
  EXPECT_EQ(r.bins[1].n_correct, 6);
  ASSERT_TRUE(r.gaps.accuracy.has_value());
  EXPECT_EQ(*r.gaps.accuracy, 0.3);
  EXPECT_EQ(*r.gaps.tpr, 0.3);
  EXPECT_FALSE(r.gaps.fpr.has_value());  // no negatives anywhere
  EXPECT_EQ(r.overall_accuracy, 0.75);
}

TEST(Subgroup, SmallBinsExcludedFromGaps) {
  std::vector<int> truth = {1, 1, 1, 1, 1, 1, 0};
  std::vector<int> pred = {1, 1, 1, 1, 1, 1, 1};
  std::vector<SkinToneBin> bins(7, SkinToneBin::tan);
  bins[6] = SkinToneBin::dark;
  const auto r = lowshot::subgroup_report(pred, truth, bins, 5);
  ASSERT_EQ(r.bins.size(), 2u);
  EXPECT_TRUE(r.bins[1].small_n);
  EXPECT_FALSE(r.gaps.accuracy.has_value());
  const std::string csv = lowshot::render_audit_csv(r);
  EXPECT_EQ(csv.rfind("bin,n,n_correct,accuracy,tpr,fpr,small_n\n", 0), 0u);
  EXPECT_NE(csv.find("gap_accuracy,,,undefined,,,\n"), std::string::npos);
}

TEST(Subgroup, PoolingRecoversOverallAccuracy) {
  lowshot::Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(300));
    const int classes = 2 + static_cast<int>(rng.uniform_index(3));
    std::vector<int> truth(n), pred(n);
    std::vector<SkinToneBin> bins(n);
    for (int i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(classes)));
      pred[i] = rng.uniform() < 0.7 ? truth[i] : static_cast<int>(rng.uniform_index(static_cast<std::size_t>(classes)));
      bins[i] = lowshot::kAllToneBins[rng.uniform_index(6)];
    }
    const auto r = lowshot::subgroup_report(pred, truth, bins);
    double pooled = 0.0;
    int total = 0;
    for (const auto& b : r.bins) {
      pooled += b.accuracy * b.n;
      total += b.n;
    }
    ASSERT_EQ(total, n);
    EXPECT_NEAR(pooled / n, r.overall_accuracy, 1e-12);
    if (classes == 2) EXPECT_TRUE(r.binary);
    if (r.binary) {
      for (const auto& b : r.bins) EXPECT_EQ(b.tp + b.fn + b.fp + b.tn, b.n);
    }
  }
}

TEST(Subgroup, InputMismatchRejected) {
  EXPECT_THROW(lowshot::subgroup_report({1, 0}, {1}, {SkinToneBin::tan}), lowshot::Error);
}

TEST(Subgroup, JsonCarriesThresholds) {
  const auto r = lowshot::subgroup_report({1, 0, 1}, {1, 1, 1}, std::vector<SkinToneBin>(3, SkinToneBin::tan), 1);
  const auto j = lowshot::to_json(r, lowshot::ItaThresholds{});
  EXPECT_TRUE(j.dump().find("55") != std::string::npos);
  EXPECT_TRUE(j.contains("bins"));
}

}  // namespace
