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
#include <span>
#include <vector>

#include "lowshot/encoders.hpp"
#include "lowshot/nn.hpp"

namespace lowshot {

struct ClassifierTrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  /// Stop once the mean epoch loss has not improved by more than min_delta
  /// for this many consecutive epochs; 0 disables early stopping.
  int patience = 5;
  double min_delta = 1e-4;
};

/// Builds the input tensor for the listed sample indices.
using BatchFn = std::function<nn::Tensor<float>(std::span<const std::size_t>)>;

/// Minibatch Adam on softmax cross-entropy. Sample order is reshuffled each
/// epoch from the config seed; the result is a pure function of its inputs.
TrainLog train_classifier(nn::ConvClassifier<float>& model, const std::vector<int>& labels,
                          const BatchFn& make_batch, const ClassifierTrainConfig& cfg);

/// Argmax predictions (ties to the lowest class index).
std::vector<int> predict_classifier(const nn::ConvClassifier<float>& model, std::size_t n,
                                    const BatchFn& make_batch, int batch_size = 64);

}  // namespace lowshot
