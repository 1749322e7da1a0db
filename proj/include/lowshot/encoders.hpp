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
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lowshot/augment.hpp"
#include "lowshot/dataset.hpp"
#include "lowshot/nn.hpp"
#include "lowshot/raster.hpp"

namespace lowshot {

enum class EncoderFamily { discriminative, self_supervised };
enum class WeightsSource { pretrained_supervised, self_supervised_checkpoint, random_init };

std::string_view to_string(EncoderFamily f);
std::string_view to_string(WeightsSource w);
EncoderFamily parse_encoder_family(std::string_view s);
WeightsSource parse_weights_source(std::string_view s);

/// Architecture and provenance of an encoder. Images are resized to
/// input_size x input_size before encoding.
struct EncoderSpec {
  EncoderFamily family = EncoderFamily::discriminative;
  std::string backbone_id = "resnet-mini";
  WeightsSource weights = WeightsSource::random_init;
  int input_size = 224;
  nn::TrunkConfig trunk{3, 7, 4, 32, {32, 64, 128, 256}};
  /// Stage whose grid serves as the local representation; -1 = final stage.
  int local_layer = -1;

  std::size_t local_stage() const;
  /// D, the width of the final stage.
  int embed_dim() const { return trunk.stage_widths.back(); }
  void validate() const;
};

nlohmann::json to_json(const EncoderSpec& spec);
EncoderSpec encoder_spec_from_json(const nlohmann::json& j);

/// H' x W' grid of D-dim vectors; grid column (y * width + x) holds one vector.
template <typename Scalar>
struct FeatureMap {
  int height = 0;
  int width = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> grid;  // D x (H' * W')

  int dim() const { return static_cast<int>(grid.rows()); }
};

template <typename Scalar>
using GlobalEmbedding = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Mean over grid positions.
template <typename Scalar>
GlobalEmbedding<Scalar> global_pool(const FeatureMap<Scalar>& fm) {
  if (fm.grid.cols() == 0) throw Error("global_pool: empty feature map");
  return fm.grid.rowwise().mean();
}

/// Candidate vectors for a contrastive loss. Rows are vectors; `*_source`
/// names the image each row came from. A positive pair (g, l) is scored
/// against every local whose source differs from that of global g.
template <typename Scalar>
struct ContrastiveBatch {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> globals;
  std::vector<int> global_source;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> locals;
  std::vector<int> local_source;
  std::vector<std::pair<int, int>> positives;
};

template <typename Scalar>
struct InfoNceResult {
  Scalar loss = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> grad_globals;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> grad_locals;
};

/// Mean over positive pairs of -log softmax of the positive's dot-product
/// score among its candidates, at temperature tau.
template <typename Scalar>
InfoNceResult<Scalar> infonce_loss(const ContrastiveBatch<Scalar>& batch, Scalar tau,
                                   bool with_grad = true);

/// Loss values reported while training an encoder.
struct TrainLog {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;  // supervised training only
};

/// An encoder with loaded weights. Immutable after construction and safe to
/// share across threads.
class Encoder {
 public:
  Encoder() = default;
  Encoder(EncoderSpec spec, nn::ResNetTrunk<float> trunk, nlohmann::json manifest);

  const EncoderSpec& spec() const { return spec_; }
  bool ready() const { return trunk_ != nullptr; }
  const nn::ResNetTrunk<float>& trunk() const;
  const nlohmann::json& manifest() const { return manifest_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

  /// Final-stage feature map.
  FeatureMap<float> encode(const Raster& img) const;
  /// Feature map of the configured local stage.
  FeatureMap<float> encode_local(const Raster& img) const;

  /// Stage maps for a batch of rasters (resized to the input resolution).
  std::vector<FeatureMap<float>> encode_batch(const std::vector<const Raster*>& imgs,
                                              std::size_t stage) const;

 private:
  EncoderSpec spec_;
  std::shared_ptr<const nn::ResNetTrunk<float>> trunk_;
  nlohmann::json manifest_;
  std::uint64_t fingerprint_ = 0;
};

/// Resize (when needed) and normalize rasters into a network input batch.
nn::Tensor<float> to_input_tensor(const std::vector<const Raster*>& imgs, int input_size);

/// Untrained encoder from the spec's architecture.
Encoder random_encoder(const EncoderSpec& spec, std::uint64_t seed);

struct DimTrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double temperature = 0.1;
  int projection_dim = 128;
  AugmentSpec view_a;
  AugmentSpec view_b;
  std::uint64_t seed = 0;
  std::string checkpoint_path;  // written when non-empty

  void validate() const;
};

nlohmann::json to_json(const DimTrainConfig& cfg);

/// Self-supervised training of a fresh encoder (labels ignored). Each batch
/// encodes two augmented views per image; view A's projected pooled
/// embedding is contrasted with view B's projected local vectors.
Encoder train_dim(const LabeledDataset& unlabeled, const EncoderSpec& arch,
                  const DimTrainConfig& cfg, TrainLog* log = nullptr);

/// Supervised pretraining on a procedurally generated shape corpus, standing
/// in for a large natural-image pretraining set.
struct PretrainConfig {
  int num_images = 4000;
  int num_classes = 10;
  int epochs = 6;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::string checkpoint_path;

  void validate() const;
};

nlohmann::json to_json(const PretrainConfig& cfg);

Encoder pretrain_discriminative(const EncoderSpec& arch, const PretrainConfig& cfg,
                                TrainLog* log = nullptr);

/// Checkpoint file: text header line, JSON manifest, then float32 parameters.
void save_encoder(const std::string& path, const Encoder& enc);
Encoder load_encoder(const std::string& path);

enum class EmbedMode { global, local };

struct GlobalEmbeddings {
  Eigen::MatrixXd features;  // N x D, row i <-> sample i
  std::vector<int> labels;
};

struct LocalEmbeddings {
  std::vector<FeatureMap<float>> maps;
  std::vector<int> labels;
};

GlobalEmbeddings embed_global(const Encoder& enc, const LabeledDataset& ds);
LocalEmbeddings embed_local(const Encoder& enc, const LabeledDataset& ds);

/// As embed_global, but reuses `<cache_dir>/<encoder fp>_<dataset fp>.global.bin`
/// when present and writes it otherwise. Empty cache_dir disables caching.
GlobalEmbeddings embed_global_cached(const Encoder& enc, const LabeledDataset& ds,
                                     const std::string& cache_dir);

}  // namespace lowshot
