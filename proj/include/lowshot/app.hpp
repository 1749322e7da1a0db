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
#include <string>
#include <vector>

#include "lowshot/bench.hpp"
#include "lowshot/config.hpp"

namespace lowshot {

struct RunOptions {
  bool dry_run = false;
  bool save_predictions = false;
};

struct RunOutcome {
  std::string run_dir;
  std::vector<std::string> plan;  // one line per cell
  ResultMatrix matrix;
};

/// Cells in execution order: shots, then methods, then seeds.
std::vector<std::string> plan_cells(const RunConfig& cfg);

/// Resolved run directory: <output_dir>/<run_id>, the id defaulting to one
/// derived from the config fingerprint.
std::string run_directory(const RunConfig& cfg);

/// Ingest, split, obtain encoders, sweep every cell and write the results
/// directory. A dry run only plans. Throws RunError after writing a partial
/// matrix when a cell fails.
RunOutcome execute_run(const RunConfig& cfg, const RunOptions& opt = {});

/// Tables (csv, json, markdown), curves.png and curves_data.csv next to the
/// matrix.
void write_reports(const ResultMatrix& m, const std::string& dir, bool allow_partial = false);

struct AuditOptions {
  /// "dataset" (tone metadata shipped with the dataset), "estimate" (ITA from
  /// the test images) or a path to an id,tone_bin CSV.
  std::string tone_source = "estimate";
  std::optional<std::string> method;
  std::optional<int> shots;
  std::optional<std::uint64_t> seed;
};

/// Subgroup report per saved prediction file; writes audit.json, audit.csv
/// and tones.csv into the run directory.
void execute_audit(const std::string& run_dir, const AuditOptions& opt);

}  // namespace lowshot
