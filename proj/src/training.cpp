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

#include "lowshot/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lowshot {

TrainLog train_classifier(nn::ConvClassifier<float>& model, const std::vector<int>& labels,
                          const BatchFn& make_batch, const ClassifierTrainConfig& cfg) {
  if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.learning_rate > 0)) {
    throw ConfigError("classifier training: epochs >= 0, batch_size >= 1, learning_rate > 0");
  }
  TrainLog log;
  const std::size_t n = labels.size();
  if (n == 0 || cfg.epochs == 0) return log;

  nn::ParamList<float> params;
  model.collect(params);
  nn::Adam<float> opt(params, cfg.learning_rate);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  double best = INFINITY;
  int stale = 0;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t len = std::min(bs, n - start);
      const std::span<const std::size_t> idx(order.data() + start, len);
      std::vector<int> y(len);
      for (std::size_t i = 0; i < len; ++i) y[i] = labels[idx[i]];

      nn::ConvClassifier<float>::Cache cache;
      const nn::Tensor<float> x = make_batch(idx);
      const nn::Matrix<float> logits = model.forward(x, &cache);
      nn::Matrix<float> grad;
      const double loss = nn::softmax_cross_entropy(logits, y, &grad);
      if (!std::isfinite(loss)) {
        throw RunError("classifier training diverged: non-finite loss at epoch " +
                       std::to_string(epoch));
      }
      for (std::size_t j = 0; j < len; ++j) {
        Eigen::Index arg = 0;
        logits.col(static_cast<Eigen::Index>(j)).maxCoeff(&arg);
        if (arg == y[j]) ++correct;
      }
      loss_sum += loss * static_cast<double>(len);
      opt.zero_grad();
      model.backward(cache, grad);
      opt.step();
    }
    const double mean_loss = loss_sum / static_cast<double>(n);
    log.epoch_loss.push_back(mean_loss);
    log.epoch_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(n));
    if (cfg.patience > 0) {
      if (mean_loss < best - cfg.min_delta) {
        best = mean_loss;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        break;
      }
    }
  }
  return log;
}

std::vector<int> predict_classifier(const nn::ConvClassifier<float>& model, std::size_t n,
                                    const BatchFn& make_batch, int batch_size) {
  std::vector<int> out;
  out.reserve(n);
  std::vector<std::size_t> idx;
  const auto bs = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t start = 0; start < n; start += bs) {
    const std::size_t len = std::min(bs, n - start);
    idx.resize(len);
    std::iota(idx.begin(), idx.end(), start);
    const nn::Matrix<float> logits = model.forward(make_batch(idx), nullptr);
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      Eigen::Index arg = 0;
      logits.col(j).maxCoeff(&arg);  // first maximum wins
      out.push_back(static_cast<int>(arg));
    }
  }
  return out;
}

}  // namespace lowshot
