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

// Minimal convolutional network toolkit: tensors in channel-major layout,
// im2col convolutions on Eigen GEMM, residual blocks, Adam. Every layer has an
// explicit forward/backward pair; caches hold what backward needs.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "lowshot/common.hpp"

namespace lowshot::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Batch of feature maps stored as channels x (batch * height * width);
/// column index is (b * height + y) * width + x.
template <typename Scalar>
struct Tensor {
  int batch = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  Matrix<Scalar> data;

  Tensor() = default;
  Tensor(int b, int c, int h, int w)
      : batch(b), channels(c), height(h), width(w), data(Matrix<Scalar>::Zero(c, b * h * w)) {}

  int spatial() const { return height * width; }
  bool empty() const { return data.size() == 0; }
};

template <typename Scalar>
struct Param {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename Scalar>
using ParamList = std::vector<Param<Scalar>*>;

template <typename Scalar>
Tensor<Scalar> relu(Tensor<Scalar> x) {
  x.data = x.data.cwiseMax(Scalar(0));
  return x;
}

/// grad * 1[activated > 0], where `activated` is the ReLU output.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& activated, Tensor<Scalar> grad) {
  grad.data = (activated.data.array() > Scalar(0)).select(grad.data, Scalar(0));
  return grad;
}

template <typename Scalar>
class Conv2d {
 public:
  struct Cache {
    int batch = 0, height = 0, width = 0;
    Matrix<Scalar> col;
  };

  Conv2d() = default;

  /// He-normal weights scaled by `gain`; zero bias. Padding keeps "same" size
  /// at stride 1.
  Conv2d(int in_channels, int out_channels, int kernel, int stride, Rng& rng, double gain = 1.0)
      : in_channels_(in_channels),
        out_channels_(out_channels),
        kernel_(kernel),
        stride_(stride),
        pad_(kernel / 2) {
    const int fan_in = in_channels * kernel * kernel;
    const double stddev = gain * std::sqrt(2.0 / fan_in);
    weight_.value.resize(out_channels, fan_in);
    for (Eigen::Index i = 0; i < weight_.value.size(); ++i) {
      weight_.value.data()[i] = static_cast<Scalar>(stddev * rng.normal());
    }
    bias_.value = Matrix<Scalar>::Zero(out_channels, 1);
    weight_.zero_grad();
    bias_.zero_grad();
  }

  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }
  int kernel() const { return kernel_; }
  int stride() const { return stride_; }

  int out_size(int n) const { return (n + 2 * pad_ - kernel_) / stride_ + 1; }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Cache* cache) const {
    if (x.channels != in_channels_) {
      throw Error("Conv2d: expected " + std::to_string(in_channels_) + " input channels, got " +
                  std::to_string(x.channels));
    }
    const int ho = out_size(x.height);
    const int wo = out_size(x.width);
    Tensor<Scalar> out(x.batch, out_channels_, ho, wo);
    Matrix<Scalar> local_col;
    Matrix<Scalar>& col = cache ? cache->col : local_col;
    im2col(x, ho, wo, col);
    out.data.noalias() = weight_.value * col;
    out.data.colwise() += bias_.value.col(0);
    if (cache) {
      cache->batch = x.batch;
      cache->height = x.height;
      cache->width = x.width;
    }
    return out;
  }

  /// Accumulates parameter gradients; returns the input gradient when asked.
  Tensor<Scalar> backward(const Cache& cache, const Tensor<Scalar>& grad_out, bool input_grad) {
    weight_.grad.noalias() += grad_out.data * cache.col.transpose();
    bias_.grad.col(0) += grad_out.data.rowwise().sum();
    if (!input_grad) return {};
    const Matrix<Scalar> dcol = weight_.value.transpose() * grad_out.data;
    Tensor<Scalar> dx(cache.batch, in_channels_, cache.height, cache.width);
    col2im(dcol, grad_out.height, grad_out.width, dx);
    return dx;
  }

  void collect(ParamList<Scalar>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  Param<Scalar>& weight() { return weight_; }
  Param<Scalar>& bias() { return bias_; }

 private:
  void im2col(const Tensor<Scalar>& x, int ho, int wo, Matrix<Scalar>& col) const {
    const int k = kernel_;
    if (k == 1 && stride_ == 1) {
      col = x.data;
      return;
    }
    col.setZero(static_cast<Eigen::Index>(in_channels_) * k * k,
                static_cast<Eigen::Index>(x.batch) * ho * wo);
    const int hw = x.height * x.width;
    for (int c = 0; c < in_channels_; ++c) {
      const Scalar* src_c = x.data.row(c).data();
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          Scalar* dst = col.row((c * k + ky) * k + kx).data();
          for (int b = 0; b < x.batch; ++b) {
            const Scalar* src = src_c + static_cast<std::size_t>(b) * hw;
            Scalar* d = dst + static_cast<std::size_t>(b) * ho * wo;
            for (int oy = 0; oy < ho; ++oy) {
              const int iy = oy * stride_ - pad_ + ky;
              if (iy < 0 || iy >= x.height) continue;
              for (int ox = 0; ox < wo; ++ox) {
                const int ix = ox * stride_ - pad_ + kx;
                if (ix < 0 || ix >= x.width) continue;
                d[oy * wo + ox] = src[iy * x.width + ix];
              }
            }
          }
        }
      }
    }
  }

  void col2im(const Matrix<Scalar>& dcol, int ho, int wo, Tensor<Scalar>& dx) const {
    const int k = kernel_;
    if (k == 1 && stride_ == 1) {
      dx.data = dcol;
      return;
    }
    const int hw = dx.height * dx.width;
    for (int c = 0; c < in_channels_; ++c) {
      Scalar* dst_c = dx.data.row(c).data();
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const Scalar* src = dcol.row((c * k + ky) * k + kx).data();
          for (int b = 0; b < dx.batch; ++b) {
            Scalar* d = dst_c + static_cast<std::size_t>(b) * hw;
            const Scalar* s = src + static_cast<std::size_t>(b) * ho * wo;
            for (int oy = 0; oy < ho; ++oy) {
              const int iy = oy * stride_ - pad_ + ky;
              if (iy < 0 || iy >= dx.height) continue;
              for (int ox = 0; ox < wo; ++ox) {
                const int ix = ox * stride_ - pad_ + kx;
                if (ix < 0 || ix >= dx.width) continue;
                d[iy * dx.width + ix] += s[oy * wo + ox];
              }
            }
          }
        }
      }
    }
  }

  int in_channels_ = 0;
  int out_channels_ = 0;
  int kernel_ = 1;
  int stride_ = 1;
  int pad_ = 0;
  Param<Scalar> weight_;
  Param<Scalar> bias_;
};

/// relu(conv3x3(relu(conv3x3(x))) + shortcut(x)); the shortcut is a strided
/// 1x1 convolution when shape changes, identity otherwise. The second
/// convolution starts small so each block begins close to its shortcut.
template <typename Scalar>
class ResidualBlock {
 public:
  struct Cache {
    typename Conv2d<Scalar>::Cache c1, c2, sc;
    Tensor<Scalar> a1;
    Tensor<Scalar> out;
  };

  ResidualBlock() = default;
  ResidualBlock(int in_channels, int out_channels, int stride, Rng& rng)
      : conv1_(in_channels, out_channels, 3, stride, rng),
        conv2_(out_channels, out_channels, 3, 1, rng, 0.25),
        projected_(in_channels != out_channels || stride != 1) {
    if (projected_) shortcut_ = Conv2d<Scalar>(in_channels, out_channels, 1, stride, rng);
  }

  int out_channels() const { return conv1_.out_channels(); }
  int out_size(int n) const { return conv1_.out_size(n); }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Cache* cache) const {
    Tensor<Scalar> a1 = relu(conv1_.forward(x, cache ? &cache->c1 : nullptr));
    Tensor<Scalar> h = conv2_.forward(a1, cache ? &cache->c2 : nullptr);
    if (projected_) {
      h.data += shortcut_.forward(x, cache ? &cache->sc : nullptr).data;
    } else {
      h.data += x.data;
    }
    Tensor<Scalar> out = relu(std::move(h));
    if (cache) {
      cache->a1 = std::move(a1);
      cache->out = out;
    }
    return out;
  }

  Tensor<Scalar> backward(const Cache& cache, const Tensor<Scalar>& grad_out, bool input_grad) {
    const Tensor<Scalar> g = relu_backward(cache.out, grad_out);
    Tensor<Scalar> da1 = relu_backward(cache.a1, conv2_.backward(cache.c2, g, true));
    Tensor<Scalar> dx = conv1_.backward(cache.c1, da1, input_grad);
    if (projected_) {
      Tensor<Scalar> dsc = shortcut_.backward(cache.sc, g, input_grad);
      if (input_grad) dx.data += dsc.data;
    } else if (input_grad) {
      dx.data += g.data;
    }
    return dx;
  }

  void collect(ParamList<Scalar>& out) {
    conv1_.collect(out);
    conv2_.collect(out);
    if (projected_) shortcut_.collect(out);
  }

 private:
  Conv2d<Scalar> conv1_;
  Conv2d<Scalar> conv2_;
  Conv2d<Scalar> shortcut_;
  bool projected_ = false;
};

struct TrunkConfig {
  int in_channels = 3;
  int stem_kernel = 3;
  int stem_stride = 1;
  int stem_width = 16;
  /// One residual block per stage; stages after the first halve resolution.
  std::vector<int> stage_widths = {16, 32, 64};

  void validate() const {
    if (in_channels < 1 || stem_kernel < 1 || stem_stride < 1 || stem_width < 1) {
      throw ConfigError("trunk: channel counts, stem kernel and stride must be >= 1");
    }
    if (stage_widths.empty()) throw ConfigError("trunk: at least one stage is required");
    for (int w : stage_widths) {
      if (w < 1) throw ConfigError("trunk: stage widths must be >= 1");
    }
  }
};

/// Stem convolution followed by residual stages; exposes every stage output.
template <typename Scalar>
class ResNetTrunk {
 public:
  struct Cache {
    typename Conv2d<Scalar>::Cache stem;
    Tensor<Scalar> stem_out;
    std::vector<typename ResidualBlock<Scalar>::Cache> stages;
  };

  ResNetTrunk() = default;
  ResNetTrunk(const TrunkConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    stem_ = Conv2d<Scalar>(cfg.in_channels, cfg.stem_width, cfg.stem_kernel, cfg.stem_stride, rng);
    int in = cfg.stem_width;
    for (std::size_t i = 0; i < cfg.stage_widths.size(); ++i) {
      stages_.emplace_back(in, cfg.stage_widths[i], i == 0 ? 1 : 2, rng);
      in = cfg.stage_widths[i];
    }
  }

  const TrunkConfig& config() const { return cfg_; }
  std::size_t num_stages() const { return stages_.size(); }
  int stage_channels(std::size_t stage) const { return cfg_.stage_widths.at(stage); }

  /// Spatial side of a stage output for a square input of side `input`.
  int stage_size(std::size_t stage, int input) const {
    int n = stem_.out_size(input);
    for (std::size_t i = 0; i <= stage; ++i) n = stages_.at(i).out_size(n);
    return n;
  }

  std::vector<Tensor<Scalar>> forward(const Tensor<Scalar>& x, Cache* cache) const {
    std::vector<Tensor<Scalar>> outs;
    outs.reserve(stages_.size());
    Tensor<Scalar> h = relu(stem_.forward(x, cache ? &cache->stem : nullptr));
    if (cache) {
      cache->stem_out = h;
      cache->stages.assign(stages_.size(), {});
    }
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      h = stages_[i].forward(h, cache ? &cache->stages[i] : nullptr);
      outs.push_back(h);
    }
    return outs;
  }

  /// `stage_grads[i]` is the loss gradient injected at stage i's output (an
  /// empty tensor means none). Returns the input gradient when asked.
  Tensor<Scalar> backward(const Cache& cache, const std::vector<Tensor<Scalar>>& stage_grads,
                          bool input_grad) {
    Tensor<Scalar> g;
    for (std::size_t i = stages_.size(); i-- > 0;) {
      if (i < stage_grads.size() && !stage_grads[i].empty()) {
        if (g.empty()) {
          g = stage_grads[i];
        } else {
          g.data += stage_grads[i].data;
        }
      }
      if (g.empty()) continue;
      g = stages_[i].backward(cache.stages[i], g, true);
    }
    if (g.empty()) return {};
    g = relu_backward(cache.stem_out, g);
    return stem_.backward(cache.stem, g, input_grad);
  }

  void collect(ParamList<Scalar>& out) {
    stem_.collect(out);
    for (auto& s : stages_) s.collect(out);
  }

 private:
  TrunkConfig cfg_;
  Conv2d<Scalar> stem_;
  std::vector<ResidualBlock<Scalar>> stages_;
};

/// Spatial mean per sample and channel: returns channels x batch (1x1 maps).
template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& x) {
  Tensor<Scalar> out(x.batch, x.channels, 1, 1);
  const int hw = x.spatial();
  for (int b = 0; b < x.batch; ++b) {
    out.data.col(b) = x.data.middleCols(static_cast<Eigen::Index>(b) * hw, hw).rowwise().mean();
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool_backward(const Tensor<Scalar>& grad, int height, int width) {
  Tensor<Scalar> dx(grad.batch, grad.channels, height, width);
  const int hw = height * width;
  const Scalar inv = Scalar(1) / static_cast<Scalar>(hw);
  for (int b = 0; b < grad.batch; ++b) {
    dx.data.middleCols(static_cast<Eigen::Index>(b) * hw, hw).colwise() = grad.data.col(b) * inv;
  }
  return dx;
}

/// Column-wise L2 normalization; `norms` receives the pre-normalization norms.
template <typename Scalar>
Matrix<Scalar> l2_normalize_columns(const Matrix<Scalar>& x, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& norms,
                                    Scalar eps = Scalar(1e-8)) {
  norms = x.colwise().norm().transpose().cwiseMax(eps);
  Matrix<Scalar> y = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) y.col(j) /= norms(j);
  return y;
}

template <typename Scalar>
Matrix<Scalar> l2_normalize_columns_backward(const Matrix<Scalar>& y,
                                             const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& norms,
                                             const Matrix<Scalar>& grad_y) {
  Matrix<Scalar> dx(y.rows(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    const Scalar proj = y.col(j).dot(grad_y.col(j));
    dx.col(j) = (grad_y.col(j) - proj * y.col(j)) / norms(j);
  }
  return dx;
}

/// Mean softmax cross-entropy over the columns of `logits` (classes x batch).
template <typename Scalar>
double softmax_cross_entropy(const Matrix<Scalar>& logits, const std::vector<int>& labels,
                             Matrix<Scalar>* grad) {
  const Eigen::Index batch = logits.cols();
  if (static_cast<std::size_t>(batch) != labels.size()) {
    throw Error("softmax_cross_entropy: label count mismatch");
  }
  if (grad) grad->resize(logits.rows(), batch);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const Scalar mx = logits.col(j).maxCoeff();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e = (logits.col(j).array() - mx).exp();
    const Scalar sum = e.sum();
    const int y = labels[static_cast<std::size_t>(j)];
    loss += -(static_cast<double>(logits(y, j) - mx) - std::log(static_cast<double>(sum)));
    if (grad) {
      grad->col(j) = e / sum;
      (*grad)(y, j) -= Scalar(1);
      grad->col(j) /= static_cast<Scalar>(batch);
    }
  }
  return loss / static_cast<double>(batch);
}

template <typename Scalar>
class Adam {
 public:
  Adam(ParamList<Scalar> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params_) {
      m_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto b1 = static_cast<Scalar>(beta1_);
    const auto b2 = static_cast<Scalar>(beta2_);
    const auto step = static_cast<Scalar>(lr_ / c1);
    const auto inv_c2 = static_cast<Scalar>(1.0 / c2);
    const auto eps = static_cast<Scalar>(eps_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& g = params_[i]->grad;
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * g;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * g.cwiseProduct(g);
      params_[i]->value.array() -=
          step * m_[i].array() / ((v_[i].array() * inv_c2).sqrt() + eps);
    }
  }

 private:
  ParamList<Scalar> params_;
  std::vector<Matrix<Scalar>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

/// Residual trunk, global average pooling of the final stage, linear layer.
template <typename Scalar>
class ConvClassifier {
 public:
  struct Cache {
    typename ResNetTrunk<Scalar>::Cache trunk;
    int height = 0, width = 0;
    typename Conv2d<Scalar>::Cache fc;
  };

  ConvClassifier() = default;
  /// The linear layer starts at the scale of a conventional fan-in uniform init.
  ConvClassifier(ResNetTrunk<Scalar> trunk, int num_classes, Rng& rng)
      : trunk_(std::move(trunk)),
        fc_(trunk_.config().stage_widths.back(), num_classes, 1, 1, rng, std::sqrt(1.0 / 6.0)) {}

  int num_classes() const { return fc_.out_channels(); }
  ResNetTrunk<Scalar>& trunk() { return trunk_; }
  const ResNetTrunk<Scalar>& trunk() const { return trunk_; }

  /// Logits, classes x batch.
  Matrix<Scalar> forward(const Tensor<Scalar>& x, Cache* cache) const {
    const auto outs = trunk_.forward(x, cache ? &cache->trunk : nullptr);
    const Tensor<Scalar>& last = outs.back();
    if (cache) {
      cache->height = last.height;
      cache->width = last.width;
    }
    return fc_.forward(global_avg_pool(last), cache ? &cache->fc : nullptr).data;
  }

  void backward(const Cache& cache, const Matrix<Scalar>& grad_logits) {
    Tensor<Scalar> g(static_cast<int>(grad_logits.cols()), fc_.out_channels(), 1, 1);
    g.data = grad_logits;
    const Tensor<Scalar> dpool = fc_.backward(cache.fc, g, true);
    std::vector<Tensor<Scalar>> stage_grads(trunk_.num_stages());
    stage_grads.back() = global_avg_pool_backward(dpool, cache.height, cache.width);
    trunk_.backward(cache.trunk, stage_grads, false);
  }

  void collect(ParamList<Scalar>& out) {
    trunk_.collect(out);
    fc_.collect(out);
  }

 private:
  ResNetTrunk<Scalar> trunk_;
  Conv2d<Scalar> fc_;
};

/// Parameter values as a flat little-endian float32 stream, preceded by the
/// count of tensors and each tensor's shape.
template <typename Scalar>
void write_params(std::ostream& out, const ParamList<Scalar>& params) {
  const auto count = static_cast<std::uint64_t>(params.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  for (const auto* p : params) {
    const std::uint64_t shape[2] = {static_cast<std::uint64_t>(p->value.rows()),
                                    static_cast<std::uint64_t>(p->value.cols())};
    out.write(reinterpret_cast<const char*>(shape), sizeof shape);
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f =
        p->value.template cast<float>();
    out.write(reinterpret_cast<const char*>(f.data()),
              static_cast<std::streamsize>(f.size() * sizeof(float)));
  }
  if (!out) throw RunError("failed writing parameters");
}

template <typename Scalar>
void read_params(std::istream& in, const ParamList<Scalar>& params) {
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in || count != params.size()) throw DataError("checkpoint parameter count mismatch");
  for (auto* p : params) {
    std::uint64_t shape[2] = {0, 0};
    in.read(reinterpret_cast<char*>(shape), sizeof shape);
    if (!in || shape[0] != static_cast<std::uint64_t>(p->value.rows()) ||
        shape[1] != static_cast<std::uint64_t>(p->value.cols())) {
      throw DataError("checkpoint parameter shape mismatch");
    }
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f(p->value.rows(),
                                                                            p->value.cols());
    in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
    if (!in) throw DataError("checkpoint truncated");
    p->value = f.template cast<Scalar>();
    p->zero_grad();
  }
}

}  // namespace lowshot::nn
