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

// K-nearest neighbors, CART random forest and an SMO-trained RBF SVM.

#include <algorithm>
#include <cmath>
#include <list>
#include <numeric>
#include <unordered_map>

#include "heads_internal.hpp"
#include "lowshot/common.hpp"

namespace lowshot {

double rbf_kernel(const Eigen::Ref<const Eigen::VectorXd>& x,
                  const Eigen::Ref<const Eigen::VectorXd>& y, double gamma) {
  if (x.size() != y.size()) throw Error("rbf_kernel: dimension mismatch");
  if (!(gamma >= 0.0)) throw Error("rbf_kernel: gamma must be >= 0");
  return std::exp(-gamma * (x - y).squaredNorm());
}

namespace detail {

namespace {

/// Index of the largest score; ties go to the lowest index.
int argmax_lowest(const std::vector<double>& scores) {
  int best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  }
  return best;
}

double squared_distance(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b,
                        Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index d = 0; d < a.cols(); ++d) {
    const double diff = a(i, d) - b(j, d);
    s += diff * diff;
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// KNN

std::vector<int> predict_knn(const KnnModel& model, int k, int num_classes,
                             const Eigen::MatrixXd& queries) {
  const auto n = static_cast<std::size_t>(model.points.rows());
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  std::vector<std::pair<double, std::size_t>> dist(n);
  std::vector<double> votes(static_cast<std::size_t>(num_classes));
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = {squared_distance(queries, q, model.points, static_cast<Eigen::Index>(i)), i};
    }
    const auto kk = static_cast<std::ptrdiff_t>(k);
    std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
    std::fill(votes.begin(), votes.end(), 0.0);
    for (std::ptrdiff_t j = 0; j < kk; ++j) {
      votes[static_cast<std::size_t>(model.labels[dist[static_cast<std::size_t>(j)].second])] += 1.0;
    }
    out.push_back(argmax_lowest(votes));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random forest

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const std::vector<int>& y, int num_classes, int max_depth,
              std::uint64_t seed)
      : x_(x), y_(y), num_classes_(num_classes), max_depth_(max_depth), rng_(seed) {
    const auto d = static_cast<int>(x.cols());
    max_features_ = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(d)))));
    features_.resize(static_cast<std::size_t>(d));
    std::iota(features_.begin(), features_.end(), 0);
  }

  std::vector<TreeNode> build(std::vector<std::size_t> rows) {
    nodes_.clear();
    grow(rows, 0);
    return std::move(nodes_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = INFINITY;
  };

  std::vector<double> class_counts(const std::vector<std::size_t>& rows) const {
    std::vector<double> counts(static_cast<std::size_t>(num_classes_), 0.0);
    for (std::size_t r : rows) counts[static_cast<std::size_t>(y_[r])] += 1.0;
    return counts;
  }

  static double gini(const std::vector<double>& counts, double total) {
    if (total <= 0) return 0.0;
    double s = 0.0;
    for (double c : counts) s += (c / total) * (c / total);
    return 1.0 - s;
  }

  /// Best threshold on one feature; rows go left when value <= threshold.
  Split best_split_on(int f, const std::vector<std::size_t>& rows) const {
    std::vector<std::pair<double, std::size_t>> vals;
    vals.reserve(rows.size());
    for (std::size_t r : rows) vals.emplace_back(x_(static_cast<Eigen::Index>(r), f), r);
    std::sort(vals.begin(), vals.end());
    Split best;
    if (vals.front().first == vals.back().first) return best;
    const std::vector<double> total = class_counts(rows);
    std::vector<double> left(static_cast<std::size_t>(num_classes_), 0.0);
    std::vector<double> right = total;
    const auto n = static_cast<double>(vals.size());
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      const auto c = static_cast<std::size_t>(y_[vals[i].second]);
      left[c] += 1.0;
      right[c] -= 1.0;
      if (vals[i].first == vals[i + 1].first) continue;
      const double nl = static_cast<double>(i + 1);
      const double nr = n - nl;
      const double imp = (nl * gini(left, nl) + nr * gini(right, nr)) / n;
      if (imp < best.impurity) {
        double thr = 0.5 * (vals[i].first + vals[i + 1].first);
        if (thr >= vals[i + 1].first) thr = vals[i].first;
        best = {f, thr, imp};
      }
    }
    return best;
  }

  int grow(const std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const std::vector<double> counts = class_counts(rows);
    const auto total = static_cast<double>(rows.size());
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
    const bool depth_capped = max_depth_ > 0 && depth >= max_depth_;
    Split best;
    if (!pure && !depth_capped && rows.size() >= 2) {
      // Features are drawn without replacement; the search continues past
      // max_features until some feature admits a split.
      const std::size_t d = features_.size();
      std::vector<int> order = features_;
      for (std::size_t i = 0; i < d; ++i) {
        std::swap(order[i], order[i + rng_.uniform_index(d - i)]);
        const Split s = best_split_on(order[i], rows);
        if (s.impurity < best.impurity) best = s;
        if (static_cast<int>(i + 1) >= max_features_ && best.feature >= 0) break;
      }
    }
    if (best.feature < 0) {
      TreeNode& leaf = nodes_[static_cast<std::size_t>(id)];
      leaf.class_prob.resize(counts.size());
      for (std::size_t c = 0; c < counts.size(); ++c) leaf.class_prob[c] = counts[c] / total;
      return id;
    }
    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) {
      (x_(static_cast<Eigen::Index>(r), best.feature) <= best.threshold ? left_rows : right_rows)
          .push_back(r);
    }
    const int l = grow(left_rows, depth + 1);
    const int r = grow(right_rows, depth + 1);
    TreeNode& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Eigen::MatrixXd& x_;
  const std::vector<int>& y_;
  int num_classes_;
  int max_depth_;
  int max_features_ = 1;
  Rng rng_;
  std::vector<int> features_;
  std::vector<TreeNode> nodes_;
};

const std::vector<double>& tree_leaf(const std::vector<TreeNode>& tree, const Eigen::MatrixXd& x,
                                     Eigen::Index row) {
  std::size_t n = 0;
  while (tree[n].feature >= 0) {
    n = static_cast<std::size_t>(x(row, tree[n].feature) <= tree[n].threshold ? tree[n].left
                                                                              : tree[n].right);
  }
  return tree[n].class_prob;
}

}  // namespace

ForestModel fit_forest(const Eigen::MatrixXd& x, const std::vector<int>& y, const ForestParams& p,
                       int num_classes, std::uint64_t seed) {
  ForestModel model;
  const std::size_t n = y.size();
  for (int t = 0; t < p.n_trees; ++t) {
    const std::uint64_t tree_seed = mix_seed(seed, static_cast<std::uint64_t>(t));
    std::vector<std::size_t> rows(n);
    if (p.bootstrap && p.n_trees > 1) {
      Rng boot(mix_seed(tree_seed, 0xb007));
      for (auto& r : rows) r = boot.uniform_index(n);
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    TreeBuilder builder(x, y, num_classes, p.max_depth, tree_seed);
    model.trees.push_back(builder.build(std::move(rows)));
  }
  return model;
}

std::vector<int> predict_forest(const ForestModel& model, int num_classes,
                                const Eigen::MatrixXd& queries) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  std::vector<double> prob(static_cast<std::size_t>(num_classes));
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    std::fill(prob.begin(), prob.end(), 0.0);
    for (const auto& tree : model.trees) {
      const auto& leaf = tree_leaf(tree, queries, q);
      for (std::size_t c = 0; c < prob.size(); ++c) prob[c] += leaf[c];
    }
    out.push_back(argmax_lowest(prob));
  }
  return out;
}

// ---------------------------------------------------------------------------
// RBF SVM: C-SVC dual solved by SMO with second-order working-set selection.

namespace {

/// Lazily computed rows of the kernel matrix under a memory budget.
class KernelRows {
 public:
  KernelRows(const Eigen::MatrixXd& x, double gamma, std::size_t budget_bytes)
      : x_(x), gamma_(gamma) {
    const std::size_t row_bytes = static_cast<std::size_t>(x.rows()) * sizeof(double);
    capacity_ = std::max<std::size_t>(2, budget_bytes / std::max<std::size_t>(1, row_bytes));
  }

  double diag() const { return 1.0; }

  const std::vector<double>& row(std::size_t i) {
    const auto it = rows_.find(i);
    if (it != rows_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.second);
      return it->second.first;
    }
    if (rows_.size() >= capacity_) {
      rows_.erase(lru_.back());
      lru_.pop_back();
    }
    std::vector<double> r(static_cast<std::size_t>(x_.rows()));
    for (Eigen::Index j = 0; j < x_.rows(); ++j) {
      r[static_cast<std::size_t>(j)] =
          std::exp(-gamma_ * squared_distance(x_, static_cast<Eigen::Index>(i), x_, j));
    }
    lru_.push_front(i);
    auto [pos, ok] = rows_.emplace(i, std::make_pair(std::move(r), lru_.begin()));
    return pos->second.first;
  }

 private:
  const Eigen::MatrixXd& x_;
  double gamma_;
  std::size_t capacity_;
  std::list<std::size_t> lru_;
  std::unordered_map<std::size_t, std::pair<std::vector<double>, std::list<std::size_t>::iterator>>
      rows_;
};

BinarySvm solve_binary(const Eigen::MatrixXd& x, const std::vector<double>& y, double gamma,
                       const SvmParams& p) {
  constexpr double kTau = 1e-12;
  const std::size_t n = y.size();
  const double c = p.C;
  KernelRows kernel(x, gamma, std::size_t{256} << 20);
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);

  const auto upper = [&](std::size_t t) { return alpha[t] >= c; };
  const auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  for (long iter = 0; iter < p.max_iterations; ++iter) {
    double gmax = -INFINITY;
    double gmax2 = -INFINITY;
    std::ptrdiff_t gi = -1;
    std::ptrdiff_t gj = -1;
    double obj_min = INFINITY;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (!upper(t) && -grad[t] >= gmax) {
          gmax = -grad[t];
          gi = static_cast<std::ptrdiff_t>(t);
        }
      } else if (!lower(t) && grad[t] >= gmax) {
        gmax = grad[t];
        gi = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (gi < 0) break;
    const auto i = static_cast<std::size_t>(gi);
    const std::vector<double>& ki = kernel.row(i);
    for (std::size_t t = 0; t < n; ++t) {
      const double qit = y[i] * y[t] * ki[t];
      if (y[t] > 0) {
        if (lower(t)) continue;
        const double diff = gmax + grad[t];
        gmax2 = std::max(gmax2, grad[t]);
        if (diff > 0) {
          double quad = 2.0 - 2.0 * y[i] * qit;
          if (quad <= 0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= obj_min) {
            obj_min = obj;
            gj = static_cast<std::ptrdiff_t>(t);
          }
        }
      } else {
        if (upper(t)) continue;
        const double diff = gmax - grad[t];
        gmax2 = std::max(gmax2, -grad[t]);
        if (diff > 0) {
          double quad = 2.0 + 2.0 * y[i] * qit;
          if (quad <= 0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= obj_min) {
            obj_min = obj;
            gj = static_cast<std::ptrdiff_t>(t);
          }
        }
      }
    }
    if (gmax + gmax2 < p.tolerance || gj < 0) break;
    const auto j = static_cast<std::size_t>(gj);
    const std::vector<double> ki_copy = ki;  // the cache may evict row i below
    const std::vector<double>& kj = kernel.row(j);
    const double qij = y[i] * y[j] * ki_copy[j];

    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = 2.0 + 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = 2.0 - 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai;
    const double daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[i] * y[t] * ki_copy[t] * dai + y[j] * y[t] * kj[t] * daj;
    }
  }

  // Offset from free support vectors, else the midpoint of the feasible range.
  double ub = INFINITY, lb = -INFINITY, sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  BinarySvm m;
  m.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  std::vector<Eigen::Index> sv;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0) sv.push_back(static_cast<Eigen::Index>(t));
  }
  m.support.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  m.coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    m.support.row(static_cast<Eigen::Index>(k)) = x.row(sv[k]);
    m.coef(static_cast<Eigen::Index>(k)) = alpha[static_cast<std::size_t>(sv[k])] * y[static_cast<std::size_t>(sv[k])];
  }
  return m;
}

}  // namespace

double resolve_gamma(const SvmParams& p, const Eigen::MatrixXd& x) {
  switch (p.gamma_rule) {
    case GammaRule::fixed: return p.gamma;
    case GammaRule::inverse_dim_variance: {
      const double mean = x.mean();
      const double var = (x.array() - mean).square().mean();
      return var > 0 ? 1.0 / (static_cast<double>(x.cols()) * var) : 1.0;
    }
    case GammaRule::median_heuristic: {
      const Eigen::Index n = std::min<Eigen::Index>(x.rows(), 1000);
      std::vector<double> d;
      d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) d.push_back(squared_distance(x, i, x, j));
      }
      if (d.empty()) return 1.0;
      const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
      std::nth_element(d.begin(), mid, d.end());
      return *mid > 0 ? 1.0 / *mid : 1.0;
    }
  }
  return 1.0;
}

SvmModel fit_svm(const Eigen::MatrixXd& x, const std::vector<int>& y, const SvmParams& p,
                 const std::vector<int>& classes) {
  SvmModel model;
  model.gamma = resolve_gamma(p, x);
  for (std::size_t a = 0; a < classes.size(); ++a) {
    for (std::size_t b = a + 1; b < classes.size(); ++b) {
      std::vector<Eigen::Index> rows;
      std::vector<double> sign;
      for (std::size_t r = 0; r < y.size(); ++r) {
        if (y[r] == classes[a] || y[r] == classes[b]) {
          rows.push_back(static_cast<Eigen::Index>(r));
          sign.push_back(y[r] == classes[a] ? 1.0 : -1.0);
        }
      }
      Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), x.cols());
      for (std::size_t k = 0; k < rows.size(); ++k) sub.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
      BinarySvm m = solve_binary(sub, sign, model.gamma, p);
      m.positive_class = classes[a];
      m.negative_class = classes[b];
      model.machines.push_back(std::move(m));
    }
  }
  return model;
}

std::vector<int> predict_svm(const SvmModel& model, int num_classes,
                             const Eigen::MatrixXd& queries) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  std::vector<double> votes(static_cast<std::size_t>(num_classes));
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    std::fill(votes.begin(), votes.end(), 0.0);
    for (const auto& m : model.machines) {
      double f = -m.rho;
      for (Eigen::Index s = 0; s < m.support.rows(); ++s) {
        f += m.coef(s) * std::exp(-model.gamma * squared_distance(queries, q, m.support, s));
      }
      votes[static_cast<std::size_t>(f > 0 ? m.positive_class : m.negative_class)] += 1.0;
    }
    out.push_back(argmax_lowest(votes));
  }
  return out;
}

}  // namespace detail
}  // namespace lowshot
