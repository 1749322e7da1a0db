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

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "lowshot/encoders.hpp"
#include "lowshot/nn.hpp"
#include "lowshot/raster.hpp"

namespace lowshot {

enum class HeadKind { knn, random_forest, rbf_svm, fine_tune };

std::string_view to_string(HeadKind kind);

struct KnnParams {
  int k = 5;
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = 0;  // 0 = grow until leaves are pure
  /// Bootstrap resampling per tree. A single-tree forest always trains on the
  /// full sample.
  bool bootstrap = true;
};

enum class GammaRule { inverse_dim_variance, median_heuristic, fixed };

struct SvmParams {
  double C = 1.0;
  GammaRule gamma_rule = GammaRule::inverse_dim_variance;
  double gamma = 0.0;  // used when gamma_rule == fixed
  double tolerance = 1e-3;
  long max_iterations = 10'000'000;
};

enum class FineTuneInput { raw_images, local_representations };

struct FineTuneParams {
  FineTuneInput input = FineTuneInput::raw_images;
  int epochs = 50;
  double learning_rate = 1e-4;
  int batch_size = 32;
  int patience = 5;  // early stop on training-loss plateau; 0 disables
  /// Residual head over local grids (local_representations only).
  int head_width = 64;
  int head_blocks = 1;
};

/// One classification strategy. Exactly one parameter block is held.
struct HeadSpec {
  std::variant<KnnParams, ForestParams, SvmParams, FineTuneParams> params = KnnParams{};
  /// Standardize embeddings with training-subset statistics (knn, svm).
  bool standardize = true;

  HeadKind kind() const { return static_cast<HeadKind>(params.index()); }
  void validate() const;
};

nlohmann::json to_json(const HeadSpec& spec);
HeadSpec head_spec_from_json(const nlohmann::json& j);

/// exp(-gamma * ||x - y||^2).
double rbf_kernel(const Eigen::Ref<const Eigen::VectorXd>& x,
                  const Eigen::Ref<const Eigen::VectorXd>& y, double gamma);

/// Raw images for end-to-end fine-tuning of a copy of `backbone`.
struct ImageInputs {
  const Encoder* backbone = nullptr;
  std::vector<const Raster*> images;
};

/// Local feature grids for the residual local-representation head.
struct LocalInputs {
  std::vector<const FeatureMap<float>*> maps;
};

using HeadInput = std::variant<Eigen::MatrixXd, ImageInputs, LocalInputs>;

std::size_t input_rows(const HeadInput& input);

struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

struct KnnModel {
  Eigen::MatrixXd points;
  std::vector<int> labels;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> class_prob;  // leaves only
};

struct ForestModel {
  std::vector<std::vector<TreeNode>> trees;
};

struct BinarySvm {
  int positive_class = 0;  // decision > 0
  int negative_class = 1;
  Eigen::MatrixXd support;
  Eigen::VectorXd coef;  // alpha_i * y_i
  double rho = 0.0;
};

struct SvmModel {
  double gamma = 0.0;
  std::vector<BinarySvm> machines;  // one per class pair
};

struct FineTuneModel {
  FineTuneInput input = FineTuneInput::raw_images;
  int input_size = 0;  // raw images
  Eigen::VectorXf channel_mean;  // local grids
  Eigen::VectorXf channel_scale;
  nn::TrunkConfig trunk;
  std::shared_ptr<nn::ConvClassifier<float>> network;
  std::vector<double> epoch_loss;
};

struct TrainedHead {
  HeadSpec spec;
  int num_classes = 0;
  std::vector<int> seen_classes;  // sorted class indices present at fit
  int feature_dim = 0;            // embedding width (knn/rf/svm)
  std::optional<Standardizer> standardizer;
  std::variant<KnnModel, ForestModel, SvmModel, FineTuneModel> model;
};

/// Fit a head. Labels index a class list of size num_classes. Deterministic
/// in (spec, input, labels, seed).
TrainedHead fit(const HeadSpec& spec, const HeadInput& input, const std::vector<int>& labels,
                int num_classes, std::uint64_t seed);

std::vector<int> predict(const TrainedHead& head, const HeadInput& input);

/// Fraction of positions where pred equals truth.
double accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

/// Full head state including preprocessing statistics; knn/rf/svm predictions
/// from a reloaded head are bit-identical.
nlohmann::json to_json(const TrainedHead& head);
TrainedHead trained_head_from_json(const nlohmann::json& j);

}  // namespace lowshot
