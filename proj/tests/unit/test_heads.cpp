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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lowshot/heads.hpp"
#include "lowshot/synthetic.hpp"

namespace {

using Eigen::MatrixXd;
using lowshot::HeadSpec;

HeadSpec knn(int k, bool standardize = false) {
  HeadSpec s;
  s.params = lowshot::KnnParams{k};
  s.standardize = standardize;
  return s;
}

HeadSpec forest(int trees, bool bootstrap = true) {
  HeadSpec s;
  lowshot::ForestParams p;
  p.n_trees = trees;
  p.bootstrap = bootstrap;
  s.params = p;
  s.standardize = false;
  return s;
}

HeadSpec svm(double C = 1.0, double gamma = 0.0) {
  HeadSpec s;
  lowshot::SvmParams p;
  p.C = C;
  if (gamma > 0) {
    p.gamma_rule = lowshot::GammaRule::fixed;
    p.gamma = gamma;
  }
  s.params = p;
  s.standardize = false;
  return s;
}

/// Exhaustive distance sort, (distance, index) order, majority vote with
/// ties to the lowest class.
std::vector<int> oracle_knn(const MatrixXd& train, const std::vector<int>& labels, int classes,
                            const MatrixXd& query, int k) {
  std::vector<int> out;
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    std::vector<std::pair<double, int>> d;
    for (Eigen::Index i = 0; i < train.rows(); ++i) {
      d.emplace_back((train.row(i) - query.row(q)).squaredNorm(), static_cast<int>(i));
    }
    std::sort(d.begin(), d.end());
    std::vector<int> votes(static_cast<std::size_t>(classes), 0);
    for (int j = 0; j < k; ++j) ++votes[static_cast<std::size_t>(labels[static_cast<std::size_t>(d[j].second)])];
    out.push_back(static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin()));
  }
  return out;
}

MatrixXd integer_points(lowshot::Rng& rng, int n, int dims) {
  MatrixXd m(n, dims);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(rng.uniform_index(7)) - 3.0;
  return m;
}

TEST(RbfKernel, Cases) {
  const Eigen::Vector2d a(0, 0), b(1, 1);
  EXPECT_NEAR(lowshot::rbf_kernel(a, b, 0.5), std::exp(-1.0), 1e-15);
  EXPECT_EQ(lowshot::rbf_kernel(b, b, 3.0), 1.0);
  EXPECT_EQ(lowshot::rbf_kernel(a, b, 0.0), 1.0);
  EXPECT_THROW(lowshot::rbf_kernel(a, Eigen::Vector3d(0, 0, 0), 1.0), lowshot::Error);
  EXPECT_THROW(lowshot::rbf_kernel(a, b, -1.0), lowshot::Error);
}

TEST(Knn, SelfMatchAtK1) {
  lowshot::Rng rng(1);
  MatrixXd x(12, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  std::vector<int> y = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};
  for (bool standardize : {false, true}) {
    const auto head = lowshot::fit(knn(1, standardize), x, y, 3, 0);
    EXPECT_EQ(lowshot::predict(head, x), y);
  }
}

TEST(Knn, MajorityAndTieRule) {
  MatrixXd x(3, 1);
  x << 0, 1, 2;
  const auto head = lowshot::fit(knn(3), x, {0, 0, 1}, 2, 0);
  MatrixXd q(1, 1);
  q << 1.5;
  EXPECT_EQ(lowshot::predict(head, q), std::vector<int>{0});

  MatrixXd t(2, 1);
  t << -1, 1;
  const auto tie = lowshot::fit(knn(2), t, {1, 0}, 2, 0);
  q << 0;
  EXPECT_EQ(lowshot::predict(tie, q), std::vector<int>{0});
  EXPECT_TRUE(lowshot::predict(tie, MatrixXd(0, 1)).empty());
}

TEST(Knn, BruteForceOracle) {
  lowshot::Rng rng(2);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 5 + static_cast<int>(rng.uniform_index(16));
    const int dims = 1 + static_cast<int>(rng.uniform_index(3));
    const int classes = 2 + static_cast<int>(rng.uniform_index(2));
    const int k = std::array{1, 3, 5}[rng.uniform_index(3)];
    const MatrixXd x = integer_points(rng, n, dims);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(classes)));
    const MatrixXd q = integer_points(rng, 10, dims);
    const auto head = lowshot::fit(knn(k), x, y, classes, 0);
    const auto got = lowshot::predict(head, q);
    const auto want = oracle_knn(x, y, classes, q, k);
    for (std::size_t i = 0; i < got.size(); ++i) mismatches += got[i] != want[i];
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(Knn, Errors) {
  MatrixXd x(3, 2);
  x.setRandom();
  EXPECT_THROW(lowshot::fit(knn(4), x, {0, 1, 0}, 2, 0), lowshot::Error);
  EXPECT_THROW(lowshot::fit(knn(1), x, {0, 1}, 2, 0), lowshot::Error);
  EXPECT_THROW(lowshot::fit(knn(1), x, {0, 1, 2}, 2, 0), lowshot::Error);
  const auto head = lowshot::fit(knn(1), x, {0, 1, 0}, 2, 0);
  EXPECT_THROW(lowshot::predict(head, MatrixXd::Zero(1, 3)), lowshot::Error);
}

TEST(Forest, SingleTreeFitsConsistentData) {
  lowshot::Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd x(40, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    std::vector<int> y(40);
    for (auto& v : y) v = static_cast<int>(rng.uniform_index(3));
    const auto head = lowshot::fit(forest(1), x, y, 3, static_cast<std::uint64_t>(trial));
    EXPECT_EQ(lowshot::accuracy(lowshot::predict(head, x), y), 1.0);
  }
}

TEST(Forest, DeterministicAndSeparates) {
  lowshot::Rng rng(4);
  MatrixXd x(60, 2);
  std::vector<int> y(60);
  for (int i = 0; i < 60; ++i) {
    y[i] = i % 2;
    x(i, 0) = rng.normal() + (y[i] ? 3 : -3);
    x(i, 1) = rng.normal();
  }
  const auto a = lowshot::fit(forest(25), x, y, 2, 7);
  const auto b = lowshot::fit(forest(25), x, y, 2, 7);
  EXPECT_EQ(lowshot::to_json(a), lowshot::to_json(b));
  MatrixXd q(2, 2);
  q << -4, 0, 4, 0;
  EXPECT_EQ(lowshot::predict(a, q), (std::vector<int>{0, 1}));
}

TEST(Svm, LinearlySeparableToy) {
  MatrixXd x(2, 2);
  x << -1, 0, 1, 0;
  MatrixXd q(2, 2);
  q << -5, 0, 5, 0;
  for (double gamma : {0.0, 0.1, 1.0}) {
    const auto head = lowshot::fit(svm(1.0, gamma), x, {0, 1}, 2, 0);
    EXPECT_EQ(lowshot::predict(head, q), (std::vector<int>{0, 1}));
  }
}

TEST(Svm, RbfSolvesXor) {
  MatrixXd x(4, 2);
  x << 0, 0, 1, 1, 0, 1, 1, 0;
  const std::vector<int> y = {0, 0, 1, 1};
  const auto head = lowshot::fit(svm(10.0, 2.0), x, y, 2, 0);
  EXPECT_EQ(lowshot::predict(head, x), y);
}

TEST(Svm, DuplicatePointInvariance) {
  lowshot::Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    MatrixXd x(20, 2);
    std::vector<int> y(20);
    for (int i = 0; i < 20; ++i) {
      y[i] = i % 3;
      x(i, 0) = rng.normal() + 4.0 * std::cos(2.1 * y[i]);
      x(i, 1) = rng.normal() + 4.0 * std::sin(2.1 * y[i]);
    }
    const std::size_t dup = rng.uniform_index(20);
    MatrixXd x2(21, 2);
    x2 << x, x.row(static_cast<Eigen::Index>(dup));
    std::vector<int> y2 = y;
    y2.push_back(y[dup]);
    const auto a = lowshot::fit(svm(100.0, 0.5), x, y, 3, 0);
    const auto b = lowshot::fit(svm(100.0, 0.5), x2, y2, 3, 0);
    MatrixXd q(200, 2);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = rng.uniform(-8, 8);
    EXPECT_EQ(lowshot::predict(a, q), lowshot::predict(b, q)) << "trial " << trial;
  }
}

TEST(Svm, NeedsTwoClasses) {
  MatrixXd x(3, 1);
  x << 0, 1, 2;
  EXPECT_THROW(lowshot::fit(svm(), x, {1, 1, 1}, 2, 0), lowshot::Error);
}

TEST(Heads, PredictOnlySeenClasses) {
  MatrixXd x(4, 1);
  x << 0, 1, 10, 11;
  const std::vector<int> y = {1, 1, 3, 3};
  MatrixXd q(50, 1);
  for (int i = 0; i < 50; ++i) q(i, 0) = i * 0.3 - 2;
  for (const HeadSpec& spec : {knn(3), forest(5), svm()}) {
    const auto head = lowshot::fit(spec, x, y, 4, 0);
    for (int p : lowshot::predict(head, q)) EXPECT_TRUE(p == 1 || p == 3);
  }
}

TEST(Heads, JsonRoundTripPredictsIdentically) {
  lowshot::Rng rng(6);
  MatrixXd x(30, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  std::vector<int> y(30);
  for (int i = 0; i < 30; ++i) y[i] = (x(i, 0) + x(i, 1) > 0) ? 1 : 0;
  MatrixXd q(40, 3);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = rng.normal();
  HeadSpec std_svm = svm();
  std_svm.standardize = true;
  for (const HeadSpec& spec : {knn(3, true), forest(10), std_svm}) {
    const auto head = lowshot::fit(spec, x, y, 2, 1);
    const auto back = lowshot::trained_head_from_json(nlohmann::json::parse(lowshot::to_json(head).dump()));
    EXPECT_EQ(lowshot::predict(back, q), lowshot::predict(head, q));
  }
}

TEST(HeadSpec, JsonParsing) {
  const auto s = lowshot::head_spec_from_json({{"kind", "rbf_svm"}, {"gamma", 0.25}});
  ASSERT_EQ(s.kind(), lowshot::HeadKind::rbf_svm);
  EXPECT_EQ(std::get<lowshot::SvmParams>(s.params).gamma_rule, lowshot::GammaRule::fixed);
  EXPECT_EQ(lowshot::head_spec_from_json(lowshot::to_json(s)).kind(), lowshot::HeadKind::rbf_svm);
  EXPECT_THROW(lowshot::head_spec_from_json({{"kind", "knn"}, {"kk", 3}}), lowshot::ConfigError);
  EXPECT_THROW(lowshot::head_spec_from_json({{"kind", "knn"}, {"k", 0}}), lowshot::ConfigError);
  EXPECT_THROW(lowshot::head_spec_from_json({{"kind", "lasso"}}), lowshot::ConfigError);
}

TEST(Accuracy, Cases) {
  std::vector<int> truth(156, 1);
  std::vector<int> pred(156, 0);
  std::fill(pred.begin(), pred.begin() + 88, 1);
  EXPECT_NEAR(lowshot::accuracy(pred, truth), 0.56410, 5e-6);
  EXPECT_EQ(lowshot::accuracy(truth, truth), 1.0);
  EXPECT_THROW(lowshot::accuracy({1, 0}, {1}), lowshot::Error);

  lowshot::Rng rng(7);
  std::vector<int> t(50), p(50), flip(50);
  for (int i = 0; i < 50; ++i) {
    t[i] = static_cast<int>(rng.uniform_index(2));
    p[i] = static_cast<int>(rng.uniform_index(2));
    flip[i] = 1 - p[i];
  }
  EXPECT_DOUBLE_EQ(lowshot::accuracy(flip, t), 1.0 - lowshot::accuracy(p, t));
  std::vector<std::size_t> perm(50);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<int> tp(50), pp(50);
  for (int i = 0; i < 50; ++i) {
    tp[i] = t[perm[i]];
    pp[i] = p[perm[i]];
  }
  EXPECT_EQ(lowshot::accuracy(pp, tp), lowshot::accuracy(p, t));
}

TEST(Standardizer, ConstantColumnsKeepUnitScale) {
  MatrixXd x(3, 2);
  x << 1, 5, 2, 5, 3, 5;
  const auto s = lowshot::Standardizer::fit(x);
  const MatrixXd z = s.apply(x);
  EXPECT_NEAR(z.col(0).mean(), 0.0, 1e-15);
  EXPECT_TRUE(z.col(1).isZero());
}

lowshot::EncoderSpec tiny_spec() {
  lowshot::EncoderSpec spec;
  spec.input_size = 16;
  spec.trunk = lowshot::nn::TrunkConfig{3, 3, 1, 8, {8, 16}};
  return spec;
}

TEST(FineTune, OverfitsTenImages) {
  const auto enc = lowshot::random_encoder(tiny_spec(), 1);
  const auto ds = lowshot::make_shape_dataset(2, 5, 16, 8);
  lowshot::ImageInputs in{&enc, {}};
  for (const auto& s : ds.samples) in.images.push_back(&s.pixels);
  HeadSpec spec;
  lowshot::FineTuneParams p;
  p.epochs = 150;
  p.learning_rate = 3e-3;
  p.batch_size = 10;
  p.patience = 0;
  spec.params = p;
  const auto head = lowshot::fit(spec, in, ds.labels(), 2, 3);
  EXPECT_EQ(lowshot::accuracy(lowshot::predict(head, in), ds.labels()), 1.0);
}

TEST(FineTune, LocalGridHeadOverfits) {
  const auto enc = lowshot::random_encoder(tiny_spec(), 2);
  const auto ds = lowshot::make_shape_dataset(2, 5, 16, 9);
  const auto local = lowshot::embed_local(enc, ds);
  lowshot::LocalInputs in;
  for (const auto& m : local.maps) in.maps.push_back(&m);
  HeadSpec spec;
  lowshot::FineTuneParams p;
  p.input = lowshot::FineTuneInput::local_representations;
  p.epochs = 150;
  p.learning_rate = 3e-3;
  p.batch_size = 10;
  p.patience = 0;
  p.head_width = 16;
  spec.params = p;
  // Labels 1 and 3 of 4 exercise the seen-class remapping.
  std::vector<int> labels = ds.labels();
  for (int& l : labels) l = 1 + 2 * l;
  const auto head = lowshot::fit(spec, in, labels, 4, 4);
  EXPECT_EQ(lowshot::accuracy(lowshot::predict(head, in), labels), 1.0);
}

}  // namespace
