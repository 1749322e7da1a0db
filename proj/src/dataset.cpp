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

#include "lowshot/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "lowshot/common.hpp"

namespace fs = std::filesystem;

namespace lowshot {

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::full: return "full";
    case SplitTag::train: return "train";
    case SplitTag::test: return "test";
    case SplitTag::shot_subset: return "shot_subset";
  }
  return "unknown";
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (const auto& s : samples) counts.at(static_cast<std::size_t>(s.label))++;
  return counts;
}

std::vector<int> LabeledDataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

std::vector<std::string> LabeledDataset::ids() const {
  std::vector<std::string> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.id);
  return out;
}

void LabeledDataset::validate() const {
  if (class_names.empty()) throw DataError("dataset has no classes");
  std::unordered_set<std::string> seen;
  for (const auto& s : samples) {
    if (!seen.insert(s.id).second) throw DataError("duplicate sample id: " + s.id);
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= class_names.size()) {
      throw DataError("sample " + s.id + " has out-of-range label " + std::to_string(s.label));
    }
    if (s.class_name != class_names[static_cast<std::size_t>(s.label)]) {
      throw DataError("sample " + s.id + " class name disagrees with its label");
    }
    if (s.pixels.empty()) throw DataError("sample " + s.id + " has an empty raster");
  }
}

void ShotSchedule::validate() const {
  if (shots_per_class.empty()) throw ConfigError("shot schedule is empty");
  for (std::size_t i = 0; i < shots_per_class.size(); ++i) {
    if (shots_per_class[i] < 1) throw ConfigError("shots must be >= 1");
    if (i > 0 && shots_per_class[i] >= shots_per_class[i - 1]) {
      throw ConfigError("shots must be strictly decreasing");
    }
  }
  if (seeds.empty()) throw ConfigError("shot schedule needs at least one seed");
}

ShotSchedule default_shot_schedule() { return {{5120, 639, 79, 40, 20, 10}, {0, 1, 2, 3, 4}}; }

namespace {

bool is_hidden(const fs::path& p) {
  const std::string name = p.filename().string();
  return !name.empty() && name.front() == '.';
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

void attach_tones(const fs::path& csv, LabeledDataset& ds) {
  std::ifstream in(csv);
  if (!in) throw DataError("cannot open tone metadata: " + csv.string());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) index.emplace(ds.samples[i].id, i);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw DataError(csv.string() + ":" + std::to_string(lineno) + ": expected 'id,tone_bin'");
    }
    const std::string id = trim(line.substr(0, comma));
    const std::string bin = trim(line.substr(comma + 1));
    if (lineno == 1 && id == "id") continue;
    const auto it = index.find(id);
    if (it == index.end()) {
      throw DataError(csv.string() + ":" + std::to_string(lineno) + ": unknown sample id " + id);
    }
    const auto parsed = parse_tone_bin(bin);
    if (!parsed) {
      throw DataError(csv.string() + ":" + std::to_string(lineno) + ": unknown tone bin " + bin);
    }
    ds.samples[it->second].tone_bin = *parsed;
  }
}

}  // namespace

LabeledDataset load_image_directory(const std::string& root) {
  const fs::path root_path(root);
  std::error_code ec;
  if (!fs::is_directory(root_path, ec)) throw DataError("dataset root does not exist: " + root);

  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(root_path)) {
    if (entry.is_directory() && !is_hidden(entry.path())) {
      classes.push_back(entry.path().filename().string());
    }
  }
  if (classes.empty()) throw DataError("no class subdirectories in " + root);
  std::sort(classes.begin(), classes.end());

  struct Pending {
    std::string rel;
    fs::path path;
    int label;
  };
  std::vector<Pending> pending;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (const auto& entry : fs::directory_iterator(root_path / classes[c])) {
      if (!entry.is_regular_file() || is_hidden(entry.path())) continue;
      pending.push_back({classes[c] + "/" + entry.path().filename().string(), entry.path(),
                         static_cast<int>(c)});
    }
  }
  std::sort(pending.begin(), pending.end(),
            [](const Pending& a, const Pending& b) { return a.rel < b.rel; });

  LabeledDataset ds;
  ds.class_names = classes;
  ds.split_tag = SplitTag::full;
  ds.samples.reserve(pending.size());
  for (auto& p : pending) {
    ImageSample s;
    s.id = p.rel;
    s.pixels = read_image(p.path.string());
    s.label = p.label;
    s.class_name = classes[static_cast<std::size_t>(p.label)];
    s.source_path = p.path.string();
    ds.samples.push_back(std::move(s));
  }
  const fs::path tones = root_path / "tones.csv";
  if (fs::is_regular_file(tones)) attach_tones(tones, ds);
  ds.validate();
  return ds;
}

namespace {

std::vector<std::vector<std::size_t>> members_by_class(const LabeledDataset& ds) {
  std::vector<std::vector<std::size_t>> out(ds.class_names.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    out.at(static_cast<std::size_t>(ds.samples[i].label)).push_back(i);
  }
  return out;
}

LabeledDataset subset(const LabeledDataset& ds, const std::vector<bool>& keep, SplitTag tag) {
  LabeledDataset out;
  out.class_names = ds.class_names;
  out.split_tag = tag;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (keep[i]) out.samples.push_back(ds.samples[i]);
  }
  return out;
}

constexpr std::uint64_t kSubsampleStream = 0x5ab5a3b1e5ULL;

}  // namespace

std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& ds,
                                                           double test_fraction,
                                                           std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DataError("test_fraction must lie in (0, 1), got " + format_trimmed(test_fraction, 6));
  }
  const auto groups = members_by_class(ds);
  std::vector<bool> is_test(ds.samples.size(), false);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    std::vector<std::size_t> members = groups[c];
    if (members.size() < 2) {
      throw DataError("class '" + ds.class_names[c] + "' has fewer than 2 samples; cannot split");
    }
    const auto n = static_cast<long>(members.size());
    const long n_test = std::clamp(std::lround(test_fraction * static_cast<double>(n)), 1L, n - 1);
    Rng rng(mix_seed(seed, fnv1a(ds.class_names[c])));
    rng.shuffle(members);
    for (long i = 0; i < n_test; ++i) is_test[members[static_cast<std::size_t>(i)]] = true;
  }
  std::vector<bool> is_train(is_test.size());
  for (std::size_t i = 0; i < is_test.size(); ++i) is_train[i] = !is_test[i];
  return {subset(ds, is_train, SplitTag::train), subset(ds, is_test, SplitTag::test)};
}

LabeledDataset subsample_shots(const LabeledDataset& train, int n_per_class, std::uint64_t seed) {
  if (n_per_class < 1) throw DataError("shots per class must be >= 1");
  const auto groups = members_by_class(train);
  std::vector<bool> keep(train.samples.size(), false);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    std::vector<std::size_t> members = groups[c];
    if (members.size() < static_cast<std::size_t>(n_per_class)) {
      throw DataError("class '" + train.class_names[c] + "' has " + std::to_string(members.size()) +
                      " samples, fewer than the requested " + std::to_string(n_per_class) +
                      " shots");
    }
    Rng rng(mix_seed(mix_seed(seed, kSubsampleStream), fnv1a(train.class_names[c])));
    rng.shuffle(members);
    for (int i = 0; i < n_per_class; ++i) keep[members[static_cast<std::size_t>(i)]] = true;
  }
  return subset(train, keep, SplitTag::shot_subset);
}

LabeledDataset select_ids(const LabeledDataset& ds, const std::vector<std::string>& ids,
                          SplitTag tag) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) index.emplace(ds.samples[i].id, i);
  std::vector<bool> keep(ds.samples.size(), false);
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw DataError("id not present in dataset: " + id);
    keep[it->second] = true;
  }
  return subset(ds, keep, tag);
}

void write_id_list(const std::string& path, const std::vector<std::string>& ids) {
  std::string content;
  for (const auto& id : ids) {
    content += id;
    content += '\n';
  }
  write_text_file(path, content);
}

std::vector<std::string> read_id_list(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

std::uint64_t dataset_fingerprint(const LabeledDataset& ds) {
  std::uint64_t h = kFnvBasis;
  for (const auto& name : ds.class_names) h = fnv1a(name + "\n", h);
  for (const auto& s : ds.samples) {
    h = fnv1a(s.id + "\n" + std::to_string(s.label) + "\n" + std::to_string(s.pixels.height) +
                  "x" + std::to_string(s.pixels.width) + "\n",
              h);
    h = fnv1a(s.pixels.pixels.data(), s.pixels.pixels.size(), h);
  }
  return h;
}

std::uint64_t id_set_fingerprint(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  std::uint64_t h = kFnvBasis;
  for (const auto& id : ids) h = fnv1a(id + "\n", h);
  return h;
}

}  // namespace lowshot
