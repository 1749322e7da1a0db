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

#include <gtest/gtest.h>

#include <functional>
#include <sstream>

#include "lowshot/nn.hpp"

namespace {

namespace nn = lowshot::nn;
using Mat = nn::Matrix<double>;

nn::Tensor<double> random_tensor(int b, int c, int h, int w, lowshot::Rng& rng) {
  nn::Tensor<double> t(b, c, h, w);
  for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data.data()[i] = rng.normal();
  return t;
}

/// Loss = <weights, output>, so d loss / d output = weights.
double probe(const Mat& out, const Mat& weights) { return (out.array() * weights.array()).sum(); }

/// Max relative error between an analytic gradient and central differences
/// of `loss` with respect to every entry of `x`.
double max_rel_error(Mat& x, const Mat& analytic, const std::function<double()>& loss, double h = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = loss();
    x.data()[i] = saved - h;
    const double down = loss();
    x.data()[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double a = analytic.data()[i];
    worst = std::max(worst, std::abs(numeric - a) / std::max(1.0, std::abs(numeric) + std::abs(a)));
  }
  return worst;
}

TEST(Conv2d, ShapesAndPadding) {
  lowshot::Rng rng(1);
  nn::Conv2d<double> conv(3, 5, 3, 2, rng);
  const auto x = random_tensor(2, 3, 9, 7, rng);
  const auto y = conv.forward(x, nullptr);
  EXPECT_EQ(y.channels, 5);
  EXPECT_EQ(y.height, 5);
  EXPECT_EQ(y.width, 4);
  EXPECT_EQ(y.batch, 2);
  EXPECT_THROW(conv.forward(random_tensor(1, 4, 5, 5, rng), nullptr), lowshot::Error);
}

// Direct convolution as an independent oracle for im2col + GEMM.
TEST(Conv2d, MatchesDirectConvolution) {
  lowshot::Rng rng(2);
  nn::Conv2d<double> conv(2, 3, 3, 2, rng);
  conv.bias().value << 0.1, -0.2, 0.3;
  const auto x = random_tensor(2, 2, 6, 5, rng);
  const auto y = conv.forward(x, nullptr);
  for (int b = 0; b < 2; ++b)
    for (int o = 0; o < 3; ++o)
      for (int oy = 0; oy < y.height; ++oy)
        for (int ox = 0; ox < y.width; ++ox) {
          double s = conv.bias().value(o, 0);
          for (int c = 0; c < 2; ++c)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
                if (iy < 0 || iy >= 6 || ix < 0 || ix >= 5) continue;
                s += conv.weight().value(o, (c * 3 + ky) * 3 + kx) * x.data(c, (b * 6 + iy) * 5 + ix);
              }
          EXPECT_NEAR(y.data(o, (b * y.height + oy) * y.width + ox), s, 1e-12);
        }
}

TEST(Conv2d, GradientCheck) {
  lowshot::Rng rng(3);
  nn::Conv2d<double> conv(2, 3, 3, 2, rng);
  auto x = random_tensor(2, 2, 5, 6, rng);
  nn::Conv2d<double>::Cache cache;
  const auto y = conv.forward(x, &cache);
  const Mat w = Mat::Random(y.data.rows(), y.data.cols());
  conv.weight().zero_grad();
  conv.bias().zero_grad();
  nn::Tensor<double> g = y;
  g.data = w;
  const auto dx = conv.backward(cache, g, true);
  auto loss = [&] { return probe(conv.forward(x, nullptr).data, w); };
  EXPECT_LT(max_rel_error(x.data, dx.data, loss), 1e-7);
  const Mat dw = conv.weight().grad, db = conv.bias().grad;
  EXPECT_LT(max_rel_error(conv.weight().value, dw, loss), 1e-7);
  EXPECT_LT(max_rel_error(conv.bias().value, db, loss), 1e-7);
}

TEST(ResidualBlock, GradientCheck) {
  lowshot::Rng rng(4);
  for (auto [in, out, stride] : {std::tuple{3, 3, 1}, std::tuple{3, 4, 2}}) {
    nn::ResidualBlock<double> block(in, out, stride, rng);
    auto x = random_tensor(2, in, 6, 6, rng);
    nn::ResidualBlock<double>::Cache cache;
    const auto y = block.forward(x, &cache);
    const Mat w = Mat::Random(y.data.rows(), y.data.cols());
    nn::ParamList<double> params;
    block.collect(params);
    for (auto* p : params) p->zero_grad();
    nn::Tensor<double> g = y;
    g.data = w;
    const auto dx = block.backward(cache, g, true);
    auto loss = [&] { return probe(block.forward(x, nullptr).data, w); };
    EXPECT_LT(max_rel_error(x.data, dx.data, loss), 1e-6);
    for (auto* p : params) {
      const Mat analytic = p->grad;
      EXPECT_LT(max_rel_error(p->value, analytic, loss), 1e-6);
    }
  }
}

TEST(Trunk, StageSizesAndGradient) {
  lowshot::Rng rng(5);
  nn::TrunkConfig cfg{3, 3, 1, 4, {4, 6}};
  nn::ResNetTrunk<double> trunk(cfg, rng);
  EXPECT_EQ(trunk.stage_size(0, 8), 8);
  EXPECT_EQ(trunk.stage_size(1, 8), 4);
  auto x = random_tensor(2, 3, 8, 8, rng);
  nn::ResNetTrunk<double>::Cache cache;
  const auto outs = trunk.forward(x, &cache);
  ASSERT_EQ(outs.size(), 2u);
  EXPECT_EQ(outs[1].channels, 6);
  EXPECT_EQ(outs[1].height, 4);
  // Loss taps both stages.
  const Mat w0 = Mat::Random(outs[0].data.rows(), outs[0].data.cols());
  const Mat w1 = Mat::Random(outs[1].data.rows(), outs[1].data.cols());
  nn::ParamList<double> params;
  trunk.collect(params);
  for (auto* p : params) p->zero_grad();
  std::vector<nn::Tensor<double>> grads = outs;
  grads[0].data = w0;
  grads[1].data = w1;
  const auto dx = trunk.backward(cache, grads, true);
  auto loss = [&] {
    const auto o = trunk.forward(x, nullptr);
    return probe(o[0].data, w0) + probe(o[1].data, w1);
  };
  EXPECT_LT(max_rel_error(x.data, dx.data, loss), 1e-6);
  for (auto* p : params) {
    const Mat analytic = p->grad;
    EXPECT_LT(max_rel_error(p->value, analytic, loss), 1e-6);
  }
}

TEST(Classifier, CrossEntropyGradientCheck) {
  lowshot::Rng rng(6);
  nn::ResNetTrunk<double> trunk(nn::TrunkConfig{3, 3, 2, 4, {4, 5}}, rng);
  nn::ConvClassifier<double> model(std::move(trunk), 3, rng);
  const auto x = random_tensor(4, 3, 8, 8, rng);
  const std::vector<int> labels = {0, 2, 1, 2};
  nn::ConvClassifier<double>::Cache cache;
  const Mat logits = model.forward(x, &cache);
  ASSERT_EQ(logits.rows(), 3);
  ASSERT_EQ(logits.cols(), 4);
  nn::ParamList<double> params;
  model.collect(params);
  for (auto* p : params) p->zero_grad();
  Mat dlogits;
  nn::softmax_cross_entropy(logits, labels, &dlogits);
  model.backward(cache, dlogits);
  auto loss = [&] { return nn::softmax_cross_entropy<double>(model.forward(x, nullptr), labels, nullptr); };
  for (auto* p : params) {
    const Mat analytic = p->grad;
    EXPECT_LT(max_rel_error(p->value, analytic, loss), 1e-6);
  }
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogK) {
  const Mat logits = Mat::Zero(4, 2);
  EXPECT_NEAR(nn::softmax_cross_entropy<double>(logits, {0, 3}, nullptr), std::log(4.0), 1e-15);
  EXPECT_THROW(nn::softmax_cross_entropy<double>(logits, {0}, nullptr), lowshot::Error);
}

TEST(Pooling, MeanAndBackward) {
  lowshot::Rng rng(7);
  auto x = random_tensor(2, 3, 4, 5, rng);
  const auto p = nn::global_avg_pool(x);
  EXPECT_NEAR(p.data(1, 1), x.data.row(1).segment(20, 20).mean(), 1e-14);
  const Mat w = Mat::Random(3, 2);
  nn::Tensor<double> g = p;
  g.data = w;
  const auto dx = nn::global_avg_pool_backward(g, 4, 5);
  auto loss = [&] { return probe(nn::global_avg_pool(x).data, w); };
  EXPECT_LT(max_rel_error(x.data, dx.data, loss), 1e-9);
}

TEST(L2Normalize, UnitColumnsAndGradient) {
  lowshot::Rng rng(8);
  Mat x(5, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  Eigen::VectorXd norms;
  const Mat y = nn::l2_normalize_columns(x, norms);
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(y.col(j).norm(), 1.0, 1e-14);
  const Mat w = Mat::Random(5, 3);
  const Mat dx = nn::l2_normalize_columns_backward(y, norms, w);
  auto loss = [&] {
    Eigen::VectorXd n;
    return probe(nn::l2_normalize_columns(x, n), w);
  };
  EXPECT_LT(max_rel_error(x, dx, loss), 1e-8);
}

TEST(Adam, MinimizesQuadratic) {
  nn::Param<double> p;
  p.value = Mat::Constant(2, 2, 3.0);
  p.zero_grad();
  nn::Adam<double> opt({&p}, 0.1);
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    p.grad = 2.0 * p.value;
    opt.step();
  }
  EXPECT_LT(p.value.cwiseAbs().maxCoeff(), 1e-2);
}

TEST(Params, StreamRoundTrip) {
  lowshot::Rng rng(9);
  nn::ResNetTrunk<float> a(nn::TrunkConfig{}, rng);
  nn::ResNetTrunk<float> b(nn::TrunkConfig{}, rng);
  nn::ParamList<float> pa, pb;
  a.collect(pa);
  b.collect(pb);
  std::stringstream ss;
  nn::write_params(ss, pa);
  nn::read_params(ss, pb);
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);
}

}  // namespace
