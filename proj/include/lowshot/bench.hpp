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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lowshot/dataset.hpp"
#include "lowshot/encoders.hpp"
#include "lowshot/heads.hpp"

namespace lowshot {

enum class Representation { raw_image, global, local };

std::string_view to_string(Representation r);

/// One column of the method matrix: which encoder family feeds which head.
struct MethodSpec {
  std::string name;
  EncoderFamily encoder = EncoderFamily::discriminative;
  HeadSpec head;
  Representation representation = Representation::global;

  /// Throws ConfigError when the name's implied encoder, head kind or
  /// representation disagrees with the fields.
  void validate() const;
};

/// The eight method names in column order.
const std::vector<std::string>& method_order();

/// Column index of a method name; throws ConfigError for unknown names.
std::size_t method_rank(std::string_view name);

/// The method with its default head parameters.
MethodSpec default_method(std::string_view name);

nlohmann::json to_json(const MethodSpec& m);

struct ResultCell {
  std::string method;
  int shots = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;  // n_correct / n_test
  int n_test = 0;
  int n_correct = 0;
  std::string timestamp;
  std::uint64_t config_fingerprint = 0;
  std::uint64_t train_ids_fingerprint = 0;
  std::uint64_t test_ids_fingerprint = 0;
  std::vector<int> predictions;  // test order; kept only when requested
};

struct ResultMatrix {
  std::vector<ResultCell> cells;  // sorted by (shot position, method rank, seed position)
  ShotSchedule schedule;
  std::vector<MethodSpec> methods;
  bool complete = false;
  std::string failure;  // cell identity and cause when incomplete

  /// Exactly one cell per (method, shot, seed) triple.
  bool has_all_cells() const;
  const ResultCell* find(std::string_view method, int shots, std::uint64_t seed) const;
  /// Mean accuracy over seeds; nullopt when no cell exists.
  std::optional<double> mean_accuracy(std::string_view method, int shots) const;
};

/// Trained encoders a run draws from. Either may be null when no selected
/// method needs it.
struct BenchEncoders {
  const Encoder* discriminative = nullptr;
  const Encoder* self_supervised = nullptr;
};

struct BenchConfig {
  ShotSchedule schedule = default_shot_schedule();
  std::vector<MethodSpec> methods;
  int workers = 1;
  bool keep_predictions = false;
  std::string embedding_cache_dir;  // empty disables caching
  std::uint64_t config_fingerprint = 0;
};

/// Called once per finished cell, from the worker that ran it.
using CellCallback = std::function<void(const ResultCell&)>;

/// Fit and score every (method, shot, seed) cell against the one test set.
/// Encoders stay frozen; fine-tune heads train a fresh copy per cell. On a
/// cell failure remaining work is abandoned and the returned matrix carries
/// the finished cells with complete == false.
ResultMatrix run_shot_curve(const BenchConfig& cfg, const LabeledDataset& train,
                            const LabeledDataset& test, const BenchEncoders& encoders,
                            const CellCallback& on_cell = {});

enum class TableFormat { csv, json, markdown };

TableFormat parse_table_format(std::string_view s);

/// Shots down the rows in schedule order, methods across in column order,
/// mean accuracy in percent rounded to two decimals with trailing zeros
/// dropped. Throws unless the matrix is complete or allow_partial is set;
/// missing cells then render as empty strings.
std::string render_table(const ResultMatrix& m, TableFormat format, bool allow_partial = false);

/// One row per cell: shots,method,seed,accuracy,n_test.
std::string render_matrix_csv(const ResultMatrix& m);

nlohmann::json matrix_to_json(const ResultMatrix& m);
ResultMatrix matrix_from_json(const nlohmann::json& j);

/// Line per method of mean accuracy (percent) against shots on a log axis.
/// Writes the PNG and, alongside, the backing data as CSV
/// (method,shots,accuracy).
void plot_curves(const ResultMatrix& m, const std::string& png_path, const std::string& data_path);

/// Backing data of plot_curves.
std::string render_curve_data(const ResultMatrix& m);

}  // namespace lowshot
