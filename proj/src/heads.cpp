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

#include "lowshot/heads.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "heads_internal.hpp"
#include "lowshot/common.hpp"
#include "lowshot/training.hpp"

namespace lowshot {

using nlohmann::json;

std::string_view to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::knn: return "knn";
    case HeadKind::random_forest: return "random_forest";
    case HeadKind::rbf_svm: return "rbf_svm";
    case HeadKind::fine_tune: return "fine_tune";
  }
  return "unknown";
}

namespace {

HeadKind parse_head_kind(std::string_view s) {
  for (HeadKind k : {HeadKind::knn, HeadKind::random_forest, HeadKind::rbf_svm, HeadKind::fine_tune}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown head kind: " + std::string(s));
}

std::string_view to_string(GammaRule r) {
  switch (r) {
    case GammaRule::inverse_dim_variance: return "inverse_dim_variance";
    case GammaRule::median_heuristic: return "median_heuristic";
    case GammaRule::fixed: return "fixed";
  }
  return "unknown";
}

GammaRule parse_gamma_rule(std::string_view s) {
  if (s == "inverse_dim_variance") return GammaRule::inverse_dim_variance;
  if (s == "median_heuristic") return GammaRule::median_heuristic;
  if (s == "fixed") return GammaRule::fixed;
  throw ConfigError("unknown gamma rule: " + std::string(s));
}

std::string_view to_string(FineTuneInput in) {
  return in == FineTuneInput::raw_images ? "raw_images" : "local_representations";
}

FineTuneInput parse_fine_tune_input(std::string_view s) {
  if (s == "raw_images") return FineTuneInput::raw_images;
  if (s == "local_representations") return FineTuneInput::local_representations;
  throw ConfigError("unknown fine-tune input: " + std::string(s));
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void HeadSpec::validate() const {
  std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KnnParams>) {
          if (p.k < 1) throw ConfigError("knn: k must be >= 1");
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          if (p.n_trees < 1) throw ConfigError("random_forest: n_trees must be >= 1");
          if (p.max_depth < 0) throw ConfigError("random_forest: max_depth must be >= 0");
        } else if constexpr (std::is_same_v<P, SvmParams>) {
          if (!(p.C > 0)) throw ConfigError("rbf_svm: C must be > 0");
          if (p.gamma_rule == GammaRule::fixed && !(p.gamma > 0)) {
            throw ConfigError("rbf_svm: gamma must be > 0");
          }
          if (!(p.tolerance > 0)) throw ConfigError("rbf_svm: tolerance must be > 0");
          if (p.max_iterations < 1) throw ConfigError("rbf_svm: max_iterations must be >= 1");
        } else {
          if (p.epochs < 1) throw ConfigError("fine_tune: epochs must be >= 1");
          if (!(p.learning_rate > 0)) throw ConfigError("fine_tune: learning_rate must be > 0");
          if (p.batch_size < 1) throw ConfigError("fine_tune: batch_size must be >= 1");
          if (p.patience < 0) throw ConfigError("fine_tune: patience must be >= 0");
          if (p.head_width < 1 || p.head_blocks < 1) {
            throw ConfigError("fine_tune: head_width and head_blocks must be >= 1");
          }
        }
      },
      params);
}

json to_json(const HeadSpec& spec) {
  json j{{"kind", to_string(spec.kind())}, {"standardize", spec.standardize}};
  std::visit(
      [&j](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KnnParams>) {
          j["k"] = p.k;
          j["metric"] = "euclidean";
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          j["n_trees"] = p.n_trees;
          j["max_depth"] = p.max_depth;
          j["bootstrap"] = p.bootstrap;
        } else if constexpr (std::is_same_v<P, SvmParams>) {
          j["C"] = p.C;
          j["gamma_rule"] = to_string(p.gamma_rule);
          j["gamma"] = p.gamma;
          j["tolerance"] = p.tolerance;
          j["max_iterations"] = p.max_iterations;
        } else {
          j["input"] = to_string(p.input);
          j["epochs"] = p.epochs;
          j["learning_rate"] = p.learning_rate;
          j["batch_size"] = p.batch_size;
          j["patience"] = p.patience;
          j["head_width"] = p.head_width;
          j["head_blocks"] = p.head_blocks;
        }
      },
      spec.params);
  return j;
}

HeadSpec head_spec_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("head: missing 'kind'");
  HeadSpec s;
  read_opt(j, "standardize", s.standardize);
  switch (parse_head_kind(j.at("kind").get<std::string>())) {
    case HeadKind::knn: {
      reject_unknown_keys(j, {"kind", "standardize", "k", "metric"}, "head");
      KnnParams p;
      read_opt(j, "k", p.k);
      if (j.contains("metric") && j.at("metric") != "euclidean") {
        throw ConfigError("knn: only the euclidean metric is supported");
      }
      s.params = p;
      break;
    }
    case HeadKind::random_forest: {
      reject_unknown_keys(j, {"kind", "standardize", "n_trees", "max_depth", "bootstrap"}, "head");
      ForestParams p;
      read_opt(j, "n_trees", p.n_trees);
      read_opt(j, "max_depth", p.max_depth);
      read_opt(j, "bootstrap", p.bootstrap);
      s.params = p;
      break;
    }
    case HeadKind::rbf_svm: {
      reject_unknown_keys(
          j, {"kind", "standardize", "C", "gamma_rule", "gamma", "tolerance", "max_iterations"},
          "head");
      SvmParams p;
      read_opt(j, "C", p.C);
      if (j.contains("gamma_rule")) p.gamma_rule = parse_gamma_rule(j.at("gamma_rule").get<std::string>());
      read_opt(j, "gamma", p.gamma);
      // A bare gamma implies a fixed kernel width.
      if (j.contains("gamma") && !j.contains("gamma_rule")) p.gamma_rule = GammaRule::fixed;
      read_opt(j, "tolerance", p.tolerance);
      read_opt(j, "max_iterations", p.max_iterations);
      s.params = p;
      break;
    }
    case HeadKind::fine_tune: {
      reject_unknown_keys(j,
                          {"kind", "standardize", "input", "epochs", "learning_rate", "batch_size",
                           "patience", "head_width", "head_blocks"},
                          "head");
      FineTuneParams p;
      if (j.contains("input")) p.input = parse_fine_tune_input(j.at("input").get<std::string>());
      read_opt(j, "epochs", p.epochs);
      read_opt(j, "learning_rate", p.learning_rate);
      read_opt(j, "batch_size", p.batch_size);
      read_opt(j, "patience", p.patience);
      read_opt(j, "head_width", p.head_width);
      read_opt(j, "head_blocks", p.head_blocks);
      s.params = p;
      break;
    }
  }
  s.validate();
  return s;
}

std::size_t input_rows(const HeadInput& input) {
  return std::visit(
      [](const auto& in) -> std::size_t {
        using I = std::decay_t<decltype(in)>;
        if constexpr (std::is_same_v<I, Eigen::MatrixXd>) {
          return static_cast<std::size_t>(in.rows());
        } else if constexpr (std::is_same_v<I, ImageInputs>) {
          return in.images.size();
        } else {
          return in.maps.size();
        }
      },
      input);
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  if (x.rows() == 0) throw Error("Standardizer: empty input");
  Standardizer s;
  s.mean = x.colwise().mean();
  const Eigen::RowVectorXd var = (x.rowwise() - s.mean).array().square().colwise().mean();
  // Constant dimensions keep unit scale so they map to zero.
  s.scale = var.array().sqrt().unaryExpr([](double v) { return v > 1e-12 ? v : 1.0; });
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size()) throw Error("Standardizer: dimension mismatch");
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw Error("accuracy: length mismatch");
  if (pred.empty()) throw Error("accuracy: empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Fine-tuning

namespace {

const Eigen::MatrixXd& embeddings_of(const HeadInput& input, HeadKind kind) {
  if (const auto* m = std::get_if<Eigen::MatrixXd>(&input)) return *m;
  throw Error(std::string(to_string(kind)) + " head expects an embedding matrix");
}

/// Local grids as a network batch, standardized per channel.
nn::Tensor<float> local_batch(const LocalInputs& in, std::span<const std::size_t> idx,
                              const Eigen::VectorXf& mean, const Eigen::VectorXf& scale) {
  const FeatureMap<float>& first = *in.maps.at(idx[0]);
  const int hw = first.height * first.width;
  nn::Tensor<float> t(static_cast<int>(idx.size()), first.dim(), first.height, first.width);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const FeatureMap<float>& fm = *in.maps.at(idx[b]);
    if (fm.height != first.height || fm.width != first.width || fm.dim() != first.dim()) {
      throw Error("fine_tune: local grids differ in shape");
    }
    t.data.middleCols(static_cast<Eigen::Index>(b) * hw, hw) =
        (fm.grid.colwise() - mean).array().colwise() / scale.array();
  }
  return t;
}

BatchFn make_batch_fn(const FineTuneModel& m, const HeadInput& input) {
  if (m.input == FineTuneInput::raw_images) {
    const auto* in = std::get_if<ImageInputs>(&input);
    if (!in) throw Error("fine_tune on raw images expects image inputs");
    const int size = m.input_size;
    return [in, size](std::span<const std::size_t> idx) {
      std::vector<const Raster*> imgs;
      imgs.reserve(idx.size());
      for (std::size_t i : idx) imgs.push_back(in->images.at(i));
      return to_input_tensor(imgs, size);
    };
  }
  const auto* in = std::get_if<LocalInputs>(&input);
  if (!in) throw Error("fine_tune on local representations expects feature grids");
  return [in, &m](std::span<const std::size_t> idx) {
    return local_batch(*in, idx, m.channel_mean, m.channel_scale);
  };
}

FineTuneModel fit_fine_tune(const FineTuneParams& p, const HeadInput& input,
                            const std::vector<int>& local_labels, int num_outputs,
                            std::uint64_t seed) {
  FineTuneModel m;
  m.input = p.input;
  Rng rng(mix_seed(seed, 0xf1e7));
  if (p.input == FineTuneInput::raw_images) {
    const auto* in = std::get_if<ImageInputs>(&input);
    if (!in || !in->backbone) throw Error("fine_tune on raw images needs a backbone and images");
    m.input_size = in->backbone->spec().input_size;
    m.trunk = in->backbone->spec().trunk;
    m.network = std::make_shared<nn::ConvClassifier<float>>(
        nn::ResNetTrunk<float>(in->backbone->trunk()), num_outputs, rng);
  } else {
    const auto* in = std::get_if<LocalInputs>(&input);
    if (!in) throw Error("fine_tune on local representations expects feature grids");
    const int d = in->maps.front()->dim();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
    double count = 0;
    for (const auto* fm : in->maps) {
      const Eigen::MatrixXd g = fm->grid.cast<double>();
      sum += g.rowwise().sum();
      sq += g.array().square().matrix().rowwise().sum();
      count += static_cast<double>(g.cols());
    }
    const Eigen::VectorXd mean = sum / count;
    const Eigen::VectorXd var = (sq / count - mean.cwiseProduct(mean)).cwiseMax(0.0);
    m.channel_mean = mean.cast<float>();
    m.channel_scale =
        var.unaryExpr([](double v) { return v > 1e-12 ? std::sqrt(v) : 1.0; }).cast<float>();
    m.trunk = nn::TrunkConfig{d, 3, 1, p.head_width, std::vector<int>(static_cast<std::size_t>(p.head_blocks), p.head_width)};
    m.network = std::make_shared<nn::ConvClassifier<float>>(nn::ResNetTrunk<float>(m.trunk, rng),
                                                            num_outputs, rng);
  }
  ClassifierTrainConfig cfg;
  cfg.epochs = p.epochs;
  cfg.batch_size = p.batch_size;
  cfg.learning_rate = p.learning_rate;
  cfg.patience = p.patience;
  cfg.seed = mix_seed(seed, 0x7a1e);
  const TrainLog log = train_classifier(*m.network, local_labels, make_batch_fn(m, input), cfg);
  m.epoch_loss = log.epoch_loss;
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// fit / predict

TrainedHead fit(const HeadSpec& spec, const HeadInput& input, const std::vector<int>& labels,
                int num_classes, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = input_rows(input);
  if (n == 0) throw Error("fit: no training samples");
  if (n != labels.size()) throw Error("fit: sample and label counts differ");
  if (num_classes < 1) throw Error("fit: num_classes must be >= 1");
  std::set<int> seen;
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw Error("fit: label out of range");
    seen.insert(y);
  }
  const HeadKind kind = spec.kind();
  if ((kind == HeadKind::rbf_svm || kind == HeadKind::fine_tune) && seen.size() < 2) {
    throw Error(std::string(to_string(kind)) + ": at least two classes are required");
  }

  TrainedHead head;
  head.spec = spec;
  head.num_classes = num_classes;
  head.seen_classes.assign(seen.begin(), seen.end());

  if (kind == HeadKind::fine_tune) {
    std::vector<int> local(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      local[i] = static_cast<int>(std::lower_bound(head.seen_classes.begin(),
                                                   head.seen_classes.end(), labels[i]) -
                                  head.seen_classes.begin());
    }
    head.model = fit_fine_tune(std::get<FineTuneParams>(spec.params), input, local,
                               static_cast<int>(seen.size()), seed);
    return head;
  }

  const Eigen::MatrixXd& raw = embeddings_of(input, kind);
  head.feature_dim = static_cast<int>(raw.cols());
  const bool standardize = spec.standardize && kind != HeadKind::random_forest;
  Eigen::MatrixXd x;
  if (standardize) {
    head.standardizer = Standardizer::fit(raw);
    x = head.standardizer->apply(raw);
  }
  const Eigen::MatrixXd& xs = standardize ? x : raw;

  switch (kind) {
    case HeadKind::knn: {
      const int k = std::get<KnnParams>(spec.params).k;
      if (static_cast<std::size_t>(k) > n) {
        throw Error("knn: k = " + std::to_string(k) + " exceeds the " + std::to_string(n) +
                    " training samples");
      }
      head.model = KnnModel{xs, labels};
      break;
    }
    case HeadKind::random_forest:
      head.model = detail::fit_forest(xs, labels, std::get<ForestParams>(spec.params), num_classes, seed);
      break;
    case HeadKind::rbf_svm:
      head.model = detail::fit_svm(xs, labels, std::get<SvmParams>(spec.params), head.seen_classes);
      break;
    case HeadKind::fine_tune: break;
  }
  return head;
}

std::vector<int> predict(const TrainedHead& head, const HeadInput& input) {
  const std::size_t n = input_rows(input);
  if (n == 0) return {};
  if (const auto* ft = std::get_if<FineTuneModel>(&head.model)) {
    const std::vector<int> local = predict_classifier(*ft->network, n, make_batch_fn(*ft, input));
    std::vector<int> out(local.size());
    for (std::size_t i = 0; i < local.size(); ++i) {
      out[i] = head.seen_classes.at(static_cast<std::size_t>(local[i]));
    }
    return out;
  }
  const Eigen::MatrixXd& raw = embeddings_of(input, head.spec.kind());
  if (raw.cols() != head.feature_dim) {
    throw Error("predict: embedding width " + std::to_string(raw.cols()) + " != trained width " +
                std::to_string(head.feature_dim));
  }
  Eigen::MatrixXd x;
  if (head.standardizer) x = head.standardizer->apply(raw);
  const Eigen::MatrixXd& xs = head.standardizer ? x : raw;
  if (const auto* m = std::get_if<KnnModel>(&head.model)) {
    return detail::predict_knn(*m, std::get<KnnParams>(head.spec.params).k, head.num_classes, xs);
  }
  if (const auto* m = std::get_if<ForestModel>(&head.model)) {
    return detail::predict_forest(*m, head.num_classes, xs);
  }
  return detail::predict_svm(std::get<SvmModel>(head.model), head.num_classes, xs);
}

// ---------------------------------------------------------------------------
// Serialization. Doubles round-trip exactly through the JSON writer.

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat(static_cast<std::size_t>(m.size()));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), m.rows(), m.cols()) = m;
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) throw DataError("matrix size mismatch");
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), rows, cols);
}

json vec_to_json(const Eigen::RowVectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::RowVectorXd row_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json trunk_to_json(const nn::TrunkConfig& t) {
  return json{{"in_channels", t.in_channels}, {"stem_kernel", t.stem_kernel},
              {"stem_stride", t.stem_stride}, {"stem_width", t.stem_width},
              {"stage_widths", t.stage_widths}};
}

nn::TrunkConfig trunk_from_json(const json& j) {
  nn::TrunkConfig t;
  t.in_channels = j.at("in_channels").get<int>();
  t.stem_kernel = j.at("stem_kernel").get<int>();
  t.stem_stride = j.at("stem_stride").get<int>();
  t.stem_width = j.at("stem_width").get<int>();
  t.stage_widths = j.at("stage_widths").get<std::vector<int>>();
  t.validate();
  return t;
}

json model_to_json(const KnnModel& m) {
  return json{{"points", matrix_to_json(m.points)}, {"labels", m.labels}};
}

json model_to_json(const ForestModel& m) {
  json trees = json::array();
  for (const auto& tree : m.trees) {
    json nodes = json::array();
    for (const auto& n : tree) {
      nodes.push_back(n.feature < 0 ? json{{"prob", n.class_prob}}
                                    : json{{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}});
    }
    trees.push_back(std::move(nodes));
  }
  return json{{"trees", std::move(trees)}};
}

json model_to_json(const SvmModel& m) {
  json machines = json::array();
  for (const auto& b : m.machines) {
    machines.push_back(json{{"positive", b.positive_class},
                            {"negative", b.negative_class},
                            {"support", matrix_to_json(b.support)},
                            {"coef", std::vector<double>(b.coef.data(), b.coef.data() + b.coef.size())},
                            {"rho", b.rho}});
  }
  return json{{"gamma", m.gamma}, {"machines", std::move(machines)}};
}

json model_to_json(const FineTuneModel& m) {
  nn::ParamList<float> params;
  m.network->collect(params);
  json tensors = json::array();
  for (const auto* p : params) {
    tensors.push_back(json{{"rows", p->value.rows()},
                           {"cols", p->value.cols()},
                           {"data", std::vector<float>(p->value.data(), p->value.data() + p->value.size())}});
  }
  return json{{"input", to_string(m.input)},
              {"input_size", m.input_size},
              {"channel_mean", std::vector<float>(m.channel_mean.data(), m.channel_mean.data() + m.channel_mean.size())},
              {"channel_scale", std::vector<float>(m.channel_scale.data(), m.channel_scale.data() + m.channel_scale.size())},
              {"trunk", trunk_to_json(m.trunk)},
              {"num_outputs", m.network->num_classes()},
              {"epoch_loss", m.epoch_loss},
              {"params", std::move(tensors)}};
}

FineTuneModel fine_tune_from_json(const json& j) {
  FineTuneModel m;
  m.input = parse_fine_tune_input(j.at("input").get<std::string>());
  m.input_size = j.at("input_size").get<int>();
  const auto mean = j.at("channel_mean").get<std::vector<float>>();
  const auto scale = j.at("channel_scale").get<std::vector<float>>();
  m.channel_mean = Eigen::Map<const Eigen::VectorXf>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  m.channel_scale = Eigen::Map<const Eigen::VectorXf>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  m.trunk = trunk_from_json(j.at("trunk"));
  m.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
  Rng rng(0);
  m.network = std::make_shared<nn::ConvClassifier<float>>(nn::ResNetTrunk<float>(m.trunk, rng),
                                                          j.at("num_outputs").get<int>(), rng);
  nn::ParamList<float> params;
  m.network->collect(params);
  const json& tensors = j.at("params");
  if (tensors.size() != params.size()) throw DataError("fine-tune head: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    const auto data = t.at("data").get<std::vector<float>>();
    if (t.at("rows").get<Eigen::Index>() != params[i]->value.rows() ||
        t.at("cols").get<Eigen::Index>() != params[i]->value.cols() ||
        static_cast<Eigen::Index>(data.size()) != params[i]->value.size()) {
      throw DataError("fine-tune head: parameter shape mismatch");
    }
    std::copy(data.begin(), data.end(), params[i]->value.data());
  }
  return m;
}

}  // namespace

json to_json(const TrainedHead& head) {
  json j{{"spec", to_json(head.spec)},
         {"num_classes", head.num_classes},
         {"seen_classes", head.seen_classes},
         {"feature_dim", head.feature_dim}};
  if (head.standardizer) {
    j["standardizer"] = json{{"mean", vec_to_json(head.standardizer->mean)},
                             {"scale", vec_to_json(head.standardizer->scale)}};
  }
  j["model"] = std::visit([](const auto& m) { return model_to_json(m); }, head.model);
  return j;
}

TrainedHead trained_head_from_json(const json& j) {
  try {
    TrainedHead h;
    h.spec = head_spec_from_json(j.at("spec"));
    h.num_classes = j.at("num_classes").get<int>();
    h.seen_classes = j.at("seen_classes").get<std::vector<int>>();
    h.feature_dim = j.at("feature_dim").get<int>();
    if (j.contains("standardizer")) {
      h.standardizer = Standardizer{row_from_json(j.at("standardizer").at("mean")),
                                    row_from_json(j.at("standardizer").at("scale"))};
    }
    const json& m = j.at("model");
    switch (h.spec.kind()) {
      case HeadKind::knn:
        h.model = KnnModel{matrix_from_json(m.at("points")), m.at("labels").get<std::vector<int>>()};
        break;
      case HeadKind::random_forest: {
        ForestModel f;
        for (const auto& tree : m.at("trees")) {
          std::vector<TreeNode> nodes;
          for (const auto& n : tree) {
            TreeNode node;
            if (n.contains("prob")) {
              node.class_prob = n.at("prob").get<std::vector<double>>();
            } else {
              node.feature = n.at("f").get<int>();
              node.threshold = n.at("t").get<double>();
              node.left = n.at("l").get<int>();
              node.right = n.at("r").get<int>();
            }
            nodes.push_back(std::move(node));
          }
          f.trees.push_back(std::move(nodes));
        }
        h.model = std::move(f);
        break;
      }
      case HeadKind::rbf_svm: {
        SvmModel s;
        s.gamma = m.at("gamma").get<double>();
        for (const auto& b : m.at("machines")) {
          BinarySvm bin;
          bin.positive_class = b.at("positive").get<int>();
          bin.negative_class = b.at("negative").get<int>();
          bin.support = matrix_from_json(b.at("support"));
          const auto coef = b.at("coef").get<std::vector<double>>();
          bin.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
          bin.rho = b.at("rho").get<double>();
          s.machines.push_back(std::move(bin));
        }
        h.model = std::move(s);
        break;
      }
      case HeadKind::fine_tune: h.model = fine_tune_from_json(m); break;
    }
    return h;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed trained head: ") + e.what());
  }
}

}  // namespace lowshot
