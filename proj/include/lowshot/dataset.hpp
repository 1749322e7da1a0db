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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lowshot/raster.hpp"
#include "lowshot/skin_tone.hpp"

namespace lowshot {

struct ImageSample {
  std::string id;  // "<class_name>/<file name>", stable across runs
  Raster pixels;
  int label = 0;
  std::string class_name;
  std::optional<SkinToneBin> tone_bin;
  std::string source_path;
};

enum class SplitTag { full, train, test, shot_subset };

std::string_view to_string(SplitTag tag);

struct LabeledDataset {
  std::vector<ImageSample> samples;
  std::vector<std::string> class_names;
  SplitTag split_tag = SplitTag::full;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t num_classes() const { return class_names.size(); }

  std::vector<std::size_t> class_counts() const;
  std::vector<int> labels() const;
  std::vector<std::string> ids() const;

  /// Throws DataError if ids repeat, labels are out of range, a raster is
  /// empty, or a sample's class_name disagrees with its label.
  void validate() const;
};

/// Shots per class in listing order plus the seeds each shot count is run with.
struct ShotSchedule {
  std::vector<int> shots_per_class;
  std::vector<std::uint64_t> seeds;

  /// Shots must be >= 1 and strictly decreasing; at least one seed.
  void validate() const;
};

/// Table-1 shot counts.
ShotSchedule default_shot_schedule();

/// Ingest `<root>/<class_name>/<image files>`. Classes are the sorted
/// immediate subdirectories; samples are ordered by relative path. Hidden
/// files are ignored; every other file must decode. An optional
/// `<root>/tones.csv` (columns: id,tone_bin) attaches tone metadata.
LabeledDataset load_image_directory(const std::string& root);

/// Per class, round(test_fraction * class_size) samples go to test (kept
/// within [1, class_size - 1]). Both outputs preserve the input order.
std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& ds,
                                                           double test_fraction,
                                                           std::uint64_t seed);

/// Exactly n_per_class samples per class, taken as a prefix of one per-class
/// shuffled order, so for a fixed seed smaller subsets nest inside larger ones.
LabeledDataset subsample_shots(const LabeledDataset& train, int n_per_class, std::uint64_t seed);

/// Samples of `ds` whose ids are listed, in `ds` order. Unknown ids are an error.
LabeledDataset select_ids(const LabeledDataset& ds, const std::vector<std::string>& ids,
                          SplitTag tag);

/// Newline-delimited id manifests.
void write_id_list(const std::string& path, const std::vector<std::string>& ids);
std::vector<std::string> read_id_list(const std::string& path);

/// Hash of class names, ids, labels and pixel content.
std::uint64_t dataset_fingerprint(const LabeledDataset& ds);

/// Hash of the sorted id list; identifies a split independent of order.
std::uint64_t id_set_fingerprint(std::vector<std::string> ids);

}  // namespace lowshot
