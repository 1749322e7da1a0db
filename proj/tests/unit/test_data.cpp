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
#include <zlib.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "lowshot/augment.hpp"
#include "lowshot/common.hpp"
#include "lowshot/dataset.hpp"
#include "lowshot/raster.hpp"
#include "lowshot/synthetic.hpp"

namespace {

namespace fs = std::filesystem;
using lowshot::LabeledDataset;
using lowshot::Raster;

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("lowshot_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Raster gradient_raster(int h, int w, int salt) {
  Raster r(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) r.at(y, x, c) = static_cast<std::uint8_t>((y * 17 + x * 5 + c * 40 + salt) % 256);
  return r;
}

/// In-memory dataset with `per_class` samples per class.
LabeledDataset toy_dataset(const std::vector<int>& per_class) {
  LabeledDataset ds;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    ds.class_names.push_back("c" + std::to_string(c));
    for (int i = 0; i < per_class[c]; ++i) {
      lowshot::ImageSample s;
      s.id = ds.class_names.back() + "/" + std::to_string(i) + ".png";
      s.label = static_cast<int>(c);
      s.class_name = ds.class_names.back();
      s.pixels = gradient_raster(4, 4, i);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

std::set<std::string> id_set(const LabeledDataset& ds) {
  const auto ids = ds.ids();
  return {ids.begin(), ids.end()};
}

TEST(Raster, PngRoundTrip) {
  const fs::path dir = fresh_dir("png");
  const Raster img = gradient_raster(9, 13, 3);
  lowshot::write_png((dir / "a.png").string(), img);
  EXPECT_EQ(lowshot::read_image((dir / "a.png").string()), img);
}

TEST(Raster, TruncatedPngNamesFile) {
  const fs::path dir = fresh_dir("trunc");
  lowshot::write_png((dir / "full.png").string(), gradient_raster(32, 32, 1));
  std::string bytes = lowshot::read_text_file((dir / "full.png").string());
  lowshot::write_text_file((dir / "cut.png").string(), bytes.substr(0, bytes.size() / 2));
  try {
    lowshot::read_image((dir / "cut.png").string());
    FAIL() << "truncated file decoded";
  } catch (const lowshot::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("cut.png"), std::string::npos);
  }
}

TEST(Raster, UnknownFormatRejected) {
  const fs::path dir = fresh_dir("fmt");
  lowshot::write_text_file((dir / "x.png").string(), "not an image at all");
  EXPECT_THROW(lowshot::read_image((dir / "x.png").string()), lowshot::DataError);
}

TEST(Raster, UnitCropReproducesPixels) {
  const Raster img = gradient_raster(10, 12, 0);
  EXPECT_EQ(lowshot::crop_resize(img, 0, 0, 10, 12, 10, 12), img);
  const Raster sub = lowshot::crop_resize(img, 2, 3, 4, 5, 4, 5);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x)
      for (int c = 0; c < 3; ++c) EXPECT_EQ(sub.at(y, x, c), img.at(y + 2, x + 3, c));
}

TEST(Raster, ResizeOfConstantIsConstant) {
  const Raster img(7, 5, 123);
  const Raster out = lowshot::resize_bilinear(img, 16, 11);
  EXPECT_EQ(out.height, 16);
  EXPECT_EQ(out.width, 11);
  for (auto p : out.pixels) EXPECT_EQ(p, 123);
}

TEST(Ingest, DirectoryPerClass) {
  const fs::path root = fresh_dir("ingest");
  for (const char* name : {"a.png", "b.png", "c.png"}) {
    fs::create_directories(root / "lyme");
    lowshot::write_png((root / "lyme" / name).string(), gradient_raster(6, 6, name[0]));
  }
  for (const char* name : {"d.png", "e.png"}) {
    fs::create_directories(root / "healthy");
    lowshot::write_png((root / "healthy" / name).string(), gradient_raster(6, 6, name[0]));
  }
  lowshot::write_text_file((root / "lyme" / ".hidden").string(), "ignored");
  const LabeledDataset ds = lowshot::load_image_directory(root.string());
  ASSERT_EQ(ds.size(), 5u);
  EXPECT_EQ(ds.class_names, (std::vector<std::string>{"healthy", "lyme"}));
  EXPECT_EQ(ds.class_counts(), (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(ds.samples[0].id, "healthy/d.png");
  EXPECT_NO_THROW(ds.validate());
}

TEST(Ingest, ToneMetadataAttached) {
  const fs::path root = fresh_dir("tones");
  fs::create_directories(root / "x");
  lowshot::write_png((root / "x" / "p.png").string(), gradient_raster(4, 4, 0));
  lowshot::write_png((root / "x" / "q.png").string(), gradient_raster(4, 4, 1));
  lowshot::write_text_file((root / "tones.csv").string(), "id,tone_bin\nx/p.png,tan\n");
  const LabeledDataset ds = lowshot::load_image_directory(root.string());
  ASSERT_TRUE(ds.samples[0].tone_bin.has_value());
  EXPECT_EQ(*ds.samples[0].tone_bin, lowshot::SkinToneBin::tan);
  EXPECT_FALSE(ds.samples[1].tone_bin.has_value());
}

TEST(Ingest, Errors) {
  EXPECT_THROW(lowshot::load_image_directory((fresh_dir("missing") / "nope").string()), lowshot::DataError);
  EXPECT_THROW(lowshot::load_image_directory(fresh_dir("empty").string()), lowshot::DataError);
  const fs::path root = fresh_dir("bad");
  fs::create_directories(root / "k");
  lowshot::write_text_file((root / "k" / "broken.jpg").string(), "\xff\xd8\xff garbage");
  try {
    lowshot::load_image_directory(root.string());
    FAIL() << "undecodable file skipped";
  } catch (const lowshot::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("broken.jpg"), std::string::npos);
  }
}

TEST(Split, StratifiedCounts) {
  const LabeledDataset ds = toy_dataset({100, 100});
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    const auto [train, test] = lowshot::stratified_split(ds, 0.2, seed);
    EXPECT_EQ(train.class_counts(), (std::vector<std::size_t>{80, 80}));
    EXPECT_EQ(test.class_counts(), (std::vector<std::size_t>{20, 20}));
    EXPECT_EQ(train.split_tag, lowshot::SplitTag::train);
    EXPECT_EQ(test.split_tag, lowshot::SplitTag::test);
  }
}

TEST(Split, Deterministic) {
  const LabeledDataset ds = toy_dataset({37, 23});
  const auto a = lowshot::stratified_split(ds, 0.3, 5);
  const auto b = lowshot::stratified_split(ds, 0.3, 5);
  EXPECT_EQ(a.first.ids(), b.first.ids());
  EXPECT_EQ(a.second.ids(), b.second.ids());
}

TEST(Split, Preconditions) {
  const LabeledDataset ds = toy_dataset({10, 10});
  EXPECT_THROW(lowshot::stratified_split(ds, 0.0, 0), lowshot::DataError);
  EXPECT_THROW(lowshot::stratified_split(ds, 1.0, 0), lowshot::DataError);
  EXPECT_THROW(lowshot::stratified_split(toy_dataset({10, 1}), 0.5, 0), lowshot::DataError);
}

// Small classes still get at least one sample on each side.
TEST(Split, ClampKeepsBothSidesNonEmpty) {
  const auto [train, test] = lowshot::stratified_split(toy_dataset({2, 3}), 0.01, 0);
  EXPECT_EQ(test.class_counts(), (std::vector<std::size_t>{1, 1}));
  EXPECT_EQ(train.class_counts(), (std::vector<std::size_t>{1, 2}));
}

TEST(Subsample, IdentityAtFullSize) {
  const LabeledDataset train = toy_dataset({12, 12});
  const LabeledDataset sub = lowshot::subsample_shots(train, 12, 3);
  EXPECT_EQ(id_set(sub), id_set(train));
}

TEST(Subsample, ErrorNamesClass) {
  const LabeledDataset train = toy_dataset({12, 8});
  try {
    lowshot::subsample_shots(train, 10, 0);
    FAIL();
  } catch (const lowshot::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("c1"), std::string::npos);
  }
}

// Randomized properties: balance, subset, nesting, disjointness, purity.
TEST(SplitProperties, RandomizedConfigs) {
  lowshot::Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const int classes = 2 + static_cast<int>(rng.uniform_index(3));
    std::vector<int> sizes;
    for (int c = 0; c < classes; ++c) sizes.push_back(20 + static_cast<int>(rng.uniform_index(60)));
    const LabeledDataset ds = toy_dataset(sizes);
    const double fraction = rng.uniform(0.05, 0.5);
    const std::uint64_t seed = rng.next();
    const auto [train, test] = lowshot::stratified_split(ds, fraction, seed);

    const auto train_ids = id_set(train);
    const auto test_ids = id_set(test);
    for (const auto& id : test_ids) ASSERT_EQ(train_ids.count(id), 0u) << id;
    ASSERT_EQ(train_ids.size() + test_ids.size(), ds.size());

    const auto counts = train.class_counts();
    const std::size_t smallest = *std::min_element(counts.begin(), counts.end());
    std::vector<int> shots = {static_cast<int>(smallest), static_cast<int>(smallest) / 2, 3, 1};
    std::set<std::string> previous;
    for (auto it = shots.rbegin(); it != shots.rend(); ++it) {
      const LabeledDataset sub = lowshot::subsample_shots(train, *it, seed);
      for (std::size_t n : sub.class_counts()) ASSERT_EQ(n, static_cast<std::size_t>(*it));
      const auto ids = id_set(sub);
      for (const auto& id : ids) ASSERT_EQ(train_ids.count(id), 1u);
      for (const auto& id : previous) ASSERT_EQ(ids.count(id), 1u) << "nesting broken at n=" << *it;
      ASSERT_EQ(lowshot::subsample_shots(train, *it, seed).ids(), sub.ids());
      previous = ids;
    }
  }
}

TEST(IdList, RoundTripAndSelect) {
  const fs::path dir = fresh_dir("ids");
  const LabeledDataset ds = toy_dataset({5, 5});
  const std::vector<std::string> ids = {"c1/3.png", "c0/2.png"};
  lowshot::write_id_list((dir / "ids.txt").string(), ids);
  EXPECT_EQ(lowshot::read_id_list((dir / "ids.txt").string()), ids);
  const LabeledDataset sel = lowshot::select_ids(ds, ids, lowshot::SplitTag::test);
  EXPECT_EQ(sel.ids(), (std::vector<std::string>{"c0/2.png", "c1/3.png"}));
  EXPECT_THROW(lowshot::select_ids(ds, {"c9/0.png"}, lowshot::SplitTag::test), lowshot::DataError);
  EXPECT_EQ(lowshot::id_set_fingerprint({"a", "b"}), lowshot::id_set_fingerprint({"b", "a"}));
}

TEST(Schedule, Validation) {
  EXPECT_NO_THROW(lowshot::default_shot_schedule().validate());
  EXPECT_EQ(lowshot::default_shot_schedule().shots_per_class,
            (std::vector<int>{5120, 639, 79, 40, 20, 10}));
  lowshot::ShotSchedule s{{10, 20}, {0}};
  EXPECT_THROW(s.validate(), lowshot::ConfigError);
  s = {{10, 0}, {0}};
  EXPECT_THROW(s.validate(), lowshot::ConfigError);
  s = {{10}, {}};
  EXPECT_THROW(s.validate(), lowshot::ConfigError);
}

TEST(Augment, IdentityWithoutJitter) {
  const Raster img = gradient_raster(20, 20, 9);
  lowshot::AugmentSpec spec;
  spec.min_crop_frac = spec.max_crop_frac = 1.0;
  spec.brightness = spec.contrast = spec.saturation = spec.hue = 0.0;
  spec.out_height = spec.out_width = 20;
  EXPECT_EQ(lowshot::augment(img, spec, 123), img);
}

TEST(Augment, ShapeAndDeterminism) {
  const Raster img = gradient_raster(30, 24, 2);
  lowshot::AugmentSpec spec;
  spec.out_height = 17;
  spec.out_width = 11;
  const Raster a = lowshot::augment(img, spec, 5);
  EXPECT_EQ(a.height, 17);
  EXPECT_EQ(a.width, 11);
  EXPECT_EQ(a.pixels.size(), 17u * 11u * 3u);
  EXPECT_EQ(lowshot::augment(img, spec, 5), a);
  EXPECT_NE(lowshot::augment(img, spec, 6), a);
}

TEST(Augment, InvalidSpecRejected) {
  lowshot::AugmentSpec spec;
  spec.min_crop_frac = 0.0;
  EXPECT_THROW(spec.validate(), lowshot::ConfigError);
  spec = {};
  spec.hue = 0.7;
  EXPECT_THROW(spec.validate(), lowshot::ConfigError);
}

TEST(Synthetic, DatasetTreeReloads) {
  const fs::path root = fresh_dir("shapes");
  const LabeledDataset ds = lowshot::make_shape_dataset(3, 4, 16, 1);
  lowshot::write_dataset_tree(ds, root.string());
  const LabeledDataset back = lowshot::load_image_directory(root.string());
  EXPECT_EQ(back.size(), 12u);
  EXPECT_EQ(back.num_classes(), 3u);
  EXPECT_EQ(lowshot::make_shape_dataset(3, 4, 16, 1).samples[5].pixels, ds.samples[5].pixels);
}

// The bundled proxy corpus: 5000 rows of 784 pixels plus a digit label.
TEST(ProxyCorpus, BundledCsvIsWellFormed) {
  const std::string path = std::string(LOWSHOT_SOURCE_DIR) + "/data/mnist_5k.csv.gz";
  gzFile f = gzopen(path.c_str(), "rb");
  ASSERT_NE(f, nullptr) << path;
  std::string text;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) text.append(buf, static_cast<std::size_t>(n));
  gzclose(f);
  std::size_t rows = 0;
  std::vector<int> digits(10, 0);
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    ASSERT_EQ(std::count(line.begin(), line.end(), ','), 784);
    const int label = std::stoi(line.substr(line.rfind(',') + 1));
    ASSERT_GE(label, 0);
    ASSERT_LE(label, 9);
    ++digits[static_cast<std::size_t>(label)];
    ++rows;
  }
  EXPECT_EQ(rows, 5000u);
  EXPECT_EQ(digits[0] + digits[2] + digits[4] + digits[6] + digits[8], 2500);
}

}  // namespace
