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
#include <vector>

#include "json.hpp"
#include "lowshot/bench.hpp"
#include "lowshot/dataset.hpp"
#include "lowshot/encoders.hpp"
#include "lowshot/fairness.hpp"

namespace lowshot {

struct DatasetConfig {
  std::string root;
  double test_fraction = 0.1;
  /// One split per run: the test set is identical across every cell.
  std::uint64_t split_seed = 0;
};

struct EncoderSourceConfig {
  std::string checkpoint;  // load instead of training when non-empty
};

struct AuditConfig {
  int n_min = 5;
  double bright_fraction = 0.2;
  ItaThresholds thresholds;
  int positive_class = 1;
};

struct RunConfig {
  DatasetConfig dataset;
  ShotSchedule schedule = default_shot_schedule();
  std::vector<MethodSpec> methods;  // column order
  EncoderSpec architecture;
  EncoderSourceConfig discriminative;
  PretrainConfig pretrain;
  EncoderSourceConfig self_supervised;
  DimTrainConfig dim;
  std::string output_dir = "results";
  std::string run_id;  // empty: derived from the config fingerprint
  int workers = 1;
  bool deterministic_mode = true;
  /// Encoders and embeddings are reused across runs from here; empty disables.
  std::string cache_dir;
  AuditConfig audit;

  /// Families the selected methods draw on.
  bool needs(EncoderFamily f) const;
};

/// Every problem found, not just the first.
struct ConfigIssues {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
  std::string joined() const;
};

/// Parse with defaults for absent keys. Unknown keys, type errors and
/// invariant violations are collected; the result is only usable when
/// issues.ok().
RunConfig parse_run_config(const nlohmann::json& j, ConfigIssues& issues);

/// Cross-field and filesystem checks: dataset root exists, the largest shot
/// fits the smallest class of the training split, checkpoints exist.
void check_run_config(const RunConfig& cfg, ConfigIssues& issues);

/// Fully resolved config; parse_run_config(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& cfg);

/// Reads a config file, or the "config" member of a run manifest.
nlohmann::json read_config_json(const std::string& path);

/// Hash of the resolved config, excluding fields that only affect where or
/// how fast results are produced.
std::uint64_t config_fingerprint(const RunConfig& cfg);

}  // namespace lowshot
