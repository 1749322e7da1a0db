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

#include "lowshot/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lowshot/synthetic.hpp"
#include "lowshot/training.hpp"

namespace lowshot {

using nlohmann::json;

std::string_view to_string(EncoderFamily f) {
  return f == EncoderFamily::discriminative ? "discriminative" : "self_supervised";
}

std::string_view to_string(WeightsSource w) {
  switch (w) {
    case WeightsSource::pretrained_supervised: return "pretrained_supervised";
    case WeightsSource::self_supervised_checkpoint: return "self_supervised_checkpoint";
    case WeightsSource::random_init: return "random_init";
  }
  return "unknown";
}

EncoderFamily parse_encoder_family(std::string_view s) {
  if (s == "discriminative") return EncoderFamily::discriminative;
  if (s == "self_supervised") return EncoderFamily::self_supervised;
  throw ConfigError("unknown encoder family: " + std::string(s));
}

WeightsSource parse_weights_source(std::string_view s) {
  if (s == "pretrained_supervised") return WeightsSource::pretrained_supervised;
  if (s == "self_supervised_checkpoint") return WeightsSource::self_supervised_checkpoint;
  if (s == "random_init") return WeightsSource::random_init;
  throw ConfigError("unknown weights source: " + std::string(s));
}

std::size_t EncoderSpec::local_stage() const {
  const auto n = static_cast<int>(trunk.stage_widths.size());
  const int stage = local_layer < 0 ? n + local_layer : local_layer;
  if (stage < 0 || stage >= n) {
    throw ConfigError("local_layer " + std::to_string(local_layer) + " out of range for " +
                      std::to_string(n) + " stages");
  }
  return static_cast<std::size_t>(stage);
}

void EncoderSpec::validate() const {
  trunk.validate();
  if (input_size < 1) throw ConfigError("encoder input_size must be >= 1");
  if (trunk.in_channels != 3) throw ConfigError("encoder trunk must take 3 input channels");
  (void)local_stage();
}

json to_json(const EncoderSpec& spec) {
  return json{{"family", to_string(spec.family)},
              {"backbone_id", spec.backbone_id},
              {"weights", to_string(spec.weights)},
              {"input_size", spec.input_size},
              {"stem_kernel", spec.trunk.stem_kernel},
              {"stem_stride", spec.trunk.stem_stride},
              {"stem_width", spec.trunk.stem_width},
              {"stage_widths", spec.trunk.stage_widths},
              {"local_layer", spec.local_layer},
              {"embed_dim", spec.embed_dim()}};
}

EncoderSpec encoder_spec_from_json(const json& j) {
  EncoderSpec s;
  s.family = parse_encoder_family(j.at("family").get<std::string>());
  s.backbone_id = j.at("backbone_id").get<std::string>();
  s.weights = parse_weights_source(j.at("weights").get<std::string>());
  s.input_size = j.at("input_size").get<int>();
  s.trunk.in_channels = 3;
  s.trunk.stem_kernel = j.at("stem_kernel").get<int>();
  s.trunk.stem_stride = j.at("stem_stride").get<int>();
  s.trunk.stem_width = j.at("stem_width").get<int>();
  s.trunk.stage_widths = j.at("stage_widths").get<std::vector<int>>();
  s.local_layer = j.at("local_layer").get<int>();
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// InfoNCE

template <typename Scalar>
InfoNceResult<Scalar> infonce_loss(const ContrastiveBatch<Scalar>& batch, Scalar tau,
                                   bool with_grad) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (!(tau > Scalar(0))) throw Error("infonce_loss: temperature must be > 0");
  if (batch.positives.empty()) throw Error("infonce_loss: no positive pairs");
  const Eigen::Index ng = batch.globals.rows();
  const Eigen::Index nl = batch.locals.rows();
  if (batch.global_source.size() != static_cast<std::size_t>(ng) ||
      batch.local_source.size() != static_cast<std::size_t>(nl)) {
    throw Error("infonce_loss: source lists must match vector counts");
  }
  if (ng > 0 && nl > 0 && batch.globals.cols() != batch.locals.cols()) {
    throw Error("infonce_loss: global and local vectors differ in dimension");
  }
  for (const auto& [g, l] : batch.positives) {
    if (g < 0 || g >= ng || l < 0 || l >= nl) throw Error("infonce_loss: pair index out of range");
  }

  const Mat scores = batch.globals * batch.locals.transpose();  // ng x nl
  Mat weights;
  if (with_grad) weights = Mat::Zero(ng, nl);

  double total = 0.0;
  std::vector<Eigen::Index> candidates;
  std::vector<double> logits;
  const double inv_tau = 1.0 / static_cast<double>(tau);
  const double inv_pairs = 1.0 / static_cast<double>(batch.positives.size());
  for (const auto& [g, l] : batch.positives) {
    candidates.clear();
    candidates.push_back(l);
    for (Eigen::Index c = 0; c < nl; ++c) {
      if (c != l && batch.local_source[static_cast<std::size_t>(c)] !=
                        batch.global_source[static_cast<std::size_t>(g)]) {
        candidates.push_back(c);
      }
    }
    logits.resize(candidates.size());
    double mx = -INFINITY;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      logits[k] = static_cast<double>(scores(g, candidates[k])) * inv_tau;
      mx = std::max(mx, logits[k]);
    }
    const double z_pos = logits[0];
    double sum = 0.0;
    for (double& z : logits) {
      z = std::exp(z - mx);
      sum += z;
    }
    total += mx + std::log(sum) - z_pos;
    if (with_grad) {
      for (std::size_t k = 0; k < candidates.size(); ++k) {
        const double p = logits[k] / sum - (k == 0 ? 1.0 : 0.0);
        weights(g, candidates[k]) += static_cast<Scalar>(p * inv_tau * inv_pairs);
      }
    }
  }
  InfoNceResult<Scalar> out;
  out.loss = static_cast<Scalar>(std::max(0.0, total * inv_pairs));
  if (with_grad) {
    out.grad_globals = weights * batch.locals;
    out.grad_locals = weights.transpose() * batch.globals;
  }
  return out;
}

template InfoNceResult<float> infonce_loss(const ContrastiveBatch<float>&, float, bool);
template InfoNceResult<double> infonce_loss(const ContrastiveBatch<double>&, double, bool);

// ---------------------------------------------------------------------------
// Encoder

namespace {

std::uint64_t fingerprint_of(const json& manifest, const nn::ResNetTrunk<float>& trunk) {
  std::uint64_t h = fnv1a(manifest.dump());
  nn::ParamList<float> params;
  const_cast<nn::ResNetTrunk<float>&>(trunk).collect(params);
  for (const auto* p : params) {
    h = fnv1a(reinterpret_cast<const std::uint8_t*>(p->value.data()),
              static_cast<std::size_t>(p->value.size()) * sizeof(float), h);
  }
  return h;
}

}  // namespace

Encoder::Encoder(EncoderSpec spec, nn::ResNetTrunk<float> trunk, json manifest)
    : spec_(std::move(spec)),
      trunk_(std::make_shared<const nn::ResNetTrunk<float>>(std::move(trunk))),
      manifest_(std::move(manifest)) {
  spec_.validate();
  fingerprint_ = fingerprint_of(manifest_, *trunk_);
}

const nn::ResNetTrunk<float>& Encoder::trunk() const {
  if (!trunk_) throw Error("encoder weights are not loaded");
  return *trunk_;
}

nn::Tensor<float> to_input_tensor(const std::vector<const Raster*>& imgs, int input_size) {
  const int b = static_cast<int>(imgs.size());
  nn::Tensor<float> x(b, 3, input_size, input_size);
  const int hw = input_size * input_size;
  for (int i = 0; i < b; ++i) {
    const Raster* src = imgs[static_cast<std::size_t>(i)];
    Raster resized;
    if (src->height != input_size || src->width != input_size) {
      resized = resize_bilinear(*src, input_size, input_size);
      src = &resized;
    }
    for (int y = 0; y < input_size; ++y) {
      for (int xx = 0; xx < input_size; ++xx) {
        const std::size_t col = static_cast<std::size_t>(i) * hw + y * input_size + xx;
        for (int c = 0; c < 3; ++c) {
          x.data(c, static_cast<Eigen::Index>(col)) = (src->at(y, xx, c) / 255.0f - 0.5f) * 4.0f;
        }
      }
    }
  }
  return x;
}

std::vector<FeatureMap<float>> Encoder::encode_batch(const std::vector<const Raster*>& imgs,
                                                     std::size_t stage) const {
  const auto& net = trunk();
  std::vector<FeatureMap<float>> out;
  out.reserve(imgs.size());
  const auto outs = net.forward(to_input_tensor(imgs, spec_.input_size), nullptr);
  const nn::Tensor<float>& t = outs.at(stage);
  const int hw = t.spatial();
  for (int b = 0; b < t.batch; ++b) {
    FeatureMap<float> fm;
    fm.height = t.height;
    fm.width = t.width;
    fm.grid = t.data.middleCols(static_cast<Eigen::Index>(b) * hw, hw);
    out.push_back(std::move(fm));
  }
  return out;
}

FeatureMap<float> Encoder::encode(const Raster& img) const {
  return encode_batch({&img}, spec_.trunk.stage_widths.size() - 1).front();
}

FeatureMap<float> Encoder::encode_local(const Raster& img) const {
  return encode_batch({&img}, spec_.local_stage()).front();
}

Encoder random_encoder(const EncoderSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  nn::ResNetTrunk<float> trunk(spec.trunk, rng);
  EncoderSpec s = spec;
  s.weights = WeightsSource::random_init;
  json manifest{{"encoder", to_json(s)}, {"seed", seed}};
  return Encoder(s, std::move(trunk), std::move(manifest));
}

// ---------------------------------------------------------------------------
// Self-supervised training

void DimTrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("dim: epochs must be >= 0");
  if (batch_size < 2) throw ConfigError("dim: batch_size must be >= 2 (a batch of 1 has no negatives)");
  if (!(learning_rate > 0)) throw ConfigError("dim: learning_rate must be > 0");
  if (!(temperature > 0)) throw ConfigError("dim: temperature must be > 0");
  if (projection_dim < 1) throw ConfigError("dim: projection_dim must be >= 1");
  view_a.validate();
  view_b.validate();
}

namespace {

json augment_json(const AugmentSpec& a) {
  return json{{"min_crop_frac", a.min_crop_frac}, {"max_crop_frac", a.max_crop_frac},
              {"brightness", a.brightness},       {"contrast", a.contrast},
              {"saturation", a.saturation},       {"hue", a.hue}};
}

}  // namespace

json to_json(const DimTrainConfig& cfg) {
  return json{{"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate},
              {"temperature", cfg.temperature},
              {"projection_dim", cfg.projection_dim},
              {"view_a", augment_json(cfg.view_a)},
              {"view_b", augment_json(cfg.view_b)},
              {"seed", cfg.seed}};
}

Encoder train_dim(const LabeledDataset& unlabeled, const EncoderSpec& arch,
                  const DimTrainConfig& cfg, TrainLog* log) {
  arch.validate();
  cfg.validate();
  if (unlabeled.empty()) throw DataError("train_dim: dataset is empty");

  EncoderSpec spec = arch;
  spec.family = EncoderFamily::self_supervised;
  spec.weights = WeightsSource::self_supervised_checkpoint;
  const std::size_t local_stage = spec.local_stage();
  const std::size_t last_stage = spec.trunk.stage_widths.size() - 1;

  Rng init(cfg.seed);
  nn::ResNetTrunk<float> trunk(spec.trunk, init);
  nn::Conv2d<float> proj_global(spec.embed_dim(), cfg.projection_dim, 1, 1, init);
  nn::Conv2d<float> proj_local(spec.trunk.stage_widths[local_stage], cfg.projection_dim, 1, 1, init);
  nn::ParamList<float> params;
  trunk.collect(params);
  proj_global.collect(params);
  proj_local.collect(params);
  nn::Adam<float> opt(params, cfg.learning_rate);

  AugmentSpec view_a = cfg.view_a;
  AugmentSpec view_b = cfg.view_b;
  view_a.out_height = view_a.out_width = spec.input_size;
  view_b.out_height = view_b.out_width = spec.input_size;

  const std::size_t n = unlabeled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const auto tau = static_cast<float>(cfg.temperature);
  TrainLog local_log;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::uint64_t epoch_seed = mix_seed(cfg.seed, 0xd1a0000ULL + static_cast<std::uint64_t>(epoch));
    Rng shuffler(epoch_seed);
    shuffler.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + 2 <= n; start += bs) {
      const std::size_t len = std::min(bs, n - start);
      if (len < 2) break;
      std::vector<Raster> views_a, views_b;
      views_a.reserve(len);
      views_b.reserve(len);
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t idx = order[start + i];
        const Raster& img = unlabeled.samples[idx].pixels;
        views_a.push_back(augment(img, view_a, mix_seed(epoch_seed, 2 * idx)));
        views_b.push_back(augment(img, view_b, mix_seed(epoch_seed, 2 * idx + 1)));
      }
      std::vector<const Raster*> pa, pb;
      for (std::size_t i = 0; i < len; ++i) {
        pa.push_back(&views_a[i]);
        pb.push_back(&views_b[i]);
      }

      nn::ResNetTrunk<float>::Cache cache_a, cache_b;
      nn::Conv2d<float>::Cache cache_pg, cache_pl;
      const auto outs_a = trunk.forward(to_input_tensor(pa, spec.input_size), &cache_a);
      const auto outs_b = trunk.forward(to_input_tensor(pb, spec.input_size), &cache_b);
      const nn::Tensor<float>& final_a = outs_a[last_stage];
      const nn::Tensor<float>& local_b = outs_b[local_stage];
      const int positions = local_b.spatial();

      const nn::Tensor<float> zg = proj_global.forward(nn::global_avg_pool(final_a), &cache_pg);
      const nn::Tensor<float> zl = proj_local.forward(local_b, &cache_pl);
      Eigen::VectorXf norm_g, norm_l;
      const nn::Matrix<float> ug = nn::l2_normalize_columns(zg.data, norm_g);
      const nn::Matrix<float> ul = nn::l2_normalize_columns(zl.data, norm_l);

      ContrastiveBatch<float> cb;
      cb.globals = ug.transpose();
      cb.locals = ul.transpose();
      cb.global_source.resize(len);
      cb.local_source.resize(len * static_cast<std::size_t>(positions));
      for (std::size_t i = 0; i < len; ++i) {
        cb.global_source[i] = static_cast<int>(i);
        for (int p = 0; p < positions; ++p) {
          const auto li = static_cast<int>(i * positions + p);
          cb.local_source[static_cast<std::size_t>(li)] = static_cast<int>(i);
          cb.positives.emplace_back(static_cast<int>(i), li);
        }
      }
      const InfoNceResult<float> res = infonce_loss(cb, tau, true);
      if (!std::isfinite(res.loss)) {
        throw RunError("train_dim: non-finite loss at epoch " + std::to_string(epoch) +
                       ", batch starting at " + std::to_string(start) +
                       "; lower the learning rate or raise the temperature");
      }
      loss_sum += res.loss;
      ++batches;

      opt.zero_grad();
      const nn::Matrix<float> dug = res.grad_globals.transpose();
      const nn::Matrix<float> dul = res.grad_locals.transpose();
      nn::Tensor<float> dzg(static_cast<int>(len), cfg.projection_dim, 1, 1);
      dzg.data = nn::l2_normalize_columns_backward(ug, norm_g, dug);
      nn::Tensor<float> dzl(local_b.batch, cfg.projection_dim, local_b.height, local_b.width);
      dzl.data = nn::l2_normalize_columns_backward(ul, norm_l, dul);

      const nn::Tensor<float> dpool = proj_global.backward(cache_pg, dzg, true);
      std::vector<nn::Tensor<float>> grads_a(spec.trunk.stage_widths.size());
      grads_a[last_stage] = nn::global_avg_pool_backward(dpool, final_a.height, final_a.width);
      trunk.backward(cache_a, grads_a, false);

      std::vector<nn::Tensor<float>> grads_b(spec.trunk.stage_widths.size());
      grads_b[local_stage] = proj_local.backward(cache_pl, dzl, true);
      trunk.backward(cache_b, grads_b, false);
      opt.step();
    }
    local_log.epoch_loss.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);
    log_line(1, "dim epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) +
                    " loss " + format_fixed(local_log.epoch_loss.back(), 4));
  }

  json manifest{{"encoder", to_json(spec)},
                {"trainer", "infonce_global_local"},
                {"dim_train", to_json(cfg)},
                {"temperature", cfg.temperature},
                {"seed", cfg.seed},
                {"data_fingerprint", hex64(dataset_fingerprint(unlabeled))},
                {"n_images", n},
                {"epoch_loss", local_log.epoch_loss}};
  Encoder enc(spec, std::move(trunk), std::move(manifest));
  if (!cfg.checkpoint_path.empty()) save_encoder(cfg.checkpoint_path, enc);
  if (log) *log = std::move(local_log);
  return enc;
}

// ---------------------------------------------------------------------------
// Supervised pretraining on rendered shapes

void PretrainConfig::validate() const {
  if (num_images < 1 || num_classes < 2 || num_classes > kNumShapeKinds) {
    throw ConfigError("pretrain: num_images >= 1 and num_classes in [2, " +
                      std::to_string(kNumShapeKinds) + "]");
  }
  if (epochs < 0 || batch_size < 1 || !(learning_rate > 0)) {
    throw ConfigError("pretrain: epochs >= 0, batch_size >= 1, learning_rate > 0");
  }
}

json to_json(const PretrainConfig& cfg) {
  return json{{"corpus", "rendered_shapes"},     {"num_images", cfg.num_images},
              {"num_classes", cfg.num_classes},  {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},    {"learning_rate", cfg.learning_rate},
              {"seed", cfg.seed}};
}

Encoder pretrain_discriminative(const EncoderSpec& arch, const PretrainConfig& cfg,
                                TrainLog* log) {
  arch.validate();
  cfg.validate();
  EncoderSpec spec = arch;
  spec.family = EncoderFamily::discriminative;
  spec.weights = WeightsSource::pretrained_supervised;

  const int per_class = (cfg.num_images + cfg.num_classes - 1) / cfg.num_classes;
  const LabeledDataset corpus =
      make_shape_dataset(cfg.num_classes, per_class, spec.input_size, mix_seed(cfg.seed, 0x5a9e));
  const std::vector<int> labels = corpus.labels();

  Rng init(cfg.seed);
  nn::ConvClassifier<float> model(nn::ResNetTrunk<float>(spec.trunk, init), cfg.num_classes, init);
  ClassifierTrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.learning_rate = cfg.learning_rate;
  tc.seed = mix_seed(cfg.seed, 0x7e57);
  tc.patience = 0;
  const BatchFn batch = [&](std::span<const std::size_t> idx) {
    std::vector<const Raster*> imgs;
    imgs.reserve(idx.size());
    for (std::size_t i : idx) imgs.push_back(&corpus.samples[i].pixels);
    return to_input_tensor(imgs, spec.input_size);
  };
  TrainLog tl = train_classifier(model, labels, batch, tc);
  for (std::size_t e = 0; e < tl.epoch_loss.size(); ++e) {
    log_line(1, "pretrain epoch " + std::to_string(e + 1) + " loss " + format_fixed(tl.epoch_loss[e], 4) +
                    " accuracy " + format_fixed(tl.epoch_accuracy[e], 4));
  }

  json manifest{{"encoder", to_json(spec)},
                {"trainer", "supervised_shapes"},
                {"pretrain", to_json(cfg)},
                {"seed", cfg.seed},
                {"data_fingerprint", hex64(dataset_fingerprint(corpus))},
                {"epoch_loss", tl.epoch_loss},
                {"epoch_accuracy", tl.epoch_accuracy}};
  Encoder enc(spec, std::move(model.trunk()), std::move(manifest));
  if (!cfg.checkpoint_path.empty()) save_encoder(cfg.checkpoint_path, enc);
  if (log) *log = std::move(tl);
  return enc;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr std::string_view kCheckpointMagic = "LOWSHOT-ENCODER 1\n";
}

void save_encoder(const std::string& path, const Encoder& enc) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RunError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  const std::string header = enc.manifest().dump();
  const auto len = static_cast<std::uint64_t>(header.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  nn::ParamList<float> params;
  const_cast<nn::ResNetTrunk<float>&>(enc.trunk()).collect(params);
  nn::write_params(out, params);
}

Encoder load_encoder(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::string magic(kCheckpointMagic.size(), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (magic != kCheckpointMagic) throw DataError("not an encoder checkpoint: " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 26)) throw DataError("corrupt checkpoint header: " + path);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("corrupt checkpoint header: " + path);
  json manifest = json::parse(header);
  const EncoderSpec spec = encoder_spec_from_json(manifest.at("encoder"));
  Rng rng(0);
  nn::ResNetTrunk<float> trunk(spec.trunk, rng);
  nn::ParamList<float> params;
  trunk.collect(params);
  nn::read_params(in, params);
  return Encoder(spec, std::move(trunk), std::move(manifest));
}

// ---------------------------------------------------------------------------
// Dataset embedding

namespace {
constexpr std::size_t kEmbedBatch = 64;
}

GlobalEmbeddings embed_global(const Encoder& enc, const LabeledDataset& ds) {
  const int d = enc.spec().embed_dim();
  GlobalEmbeddings out;
  out.features.resize(static_cast<Eigen::Index>(ds.size()), d);
  out.labels = ds.labels();
  const std::size_t last = enc.spec().trunk.stage_widths.size() - 1;
  for (std::size_t start = 0; start < ds.size(); start += kEmbedBatch) {
    const std::size_t len = std::min(kEmbedBatch, ds.size() - start);
    std::vector<const Raster*> imgs;
    for (std::size_t i = 0; i < len; ++i) imgs.push_back(&ds.samples[start + i].pixels);
    const auto maps = enc.encode_batch(imgs, last);
    for (std::size_t i = 0; i < len; ++i) {
      out.features.row(static_cast<Eigen::Index>(start + i)) =
          global_pool(maps[i]).cast<double>().transpose();
    }
  }
  return out;
}

LocalEmbeddings embed_local(const Encoder& enc, const LabeledDataset& ds) {
  LocalEmbeddings out;
  out.labels = ds.labels();
  out.maps.reserve(ds.size());
  const std::size_t stage = enc.spec().local_stage();
  for (std::size_t start = 0; start < ds.size(); start += kEmbedBatch) {
    const std::size_t len = std::min(kEmbedBatch, ds.size() - start);
    std::vector<const Raster*> imgs;
    for (std::size_t i = 0; i < len; ++i) imgs.push_back(&ds.samples[start + i].pixels);
    auto maps = enc.encode_batch(imgs, stage);
    for (auto& m : maps) out.maps.push_back(std::move(m));
  }
  return out;
}

GlobalEmbeddings embed_global_cached(const Encoder& enc, const LabeledDataset& ds,
                                     const std::string& cache_dir) {
  if (cache_dir.empty()) return embed_global(enc, ds);
  namespace fs = std::filesystem;
  const fs::path file = fs::path(cache_dir) /
                        (hex64(enc.fingerprint()) + "_" + hex64(dataset_fingerprint(ds)) + ".global.bin");
  const auto rows = static_cast<Eigen::Index>(ds.size());
  const Eigen::Index cols = enc.spec().embed_dim();
  if (fs::is_regular_file(file)) {
    std::ifstream in(file, std::ios::binary);
    std::int64_t shape[2] = {0, 0};
    in.read(reinterpret_cast<char*>(shape), sizeof shape);
    if (in && shape[0] == rows && shape[1] == cols) {
      GlobalEmbeddings out;
      out.features.resize(rows, cols);
      in.read(reinterpret_cast<char*>(out.features.data()),
              static_cast<std::streamsize>(out.features.size() * sizeof(double)));
      if (in) {
        out.labels = ds.labels();
        return out;
      }
    }
  }
  GlobalEmbeddings out = embed_global(enc, ds);
  fs::create_directories(cache_dir);
  std::ofstream o(file, std::ios::binary | std::ios::trunc);
  const std::int64_t shape[2] = {rows, cols};
  o.write(reinterpret_cast<const char*>(shape), sizeof shape);
  o.write(reinterpret_cast<const char*>(out.features.data()),
          static_cast<std::streamsize>(out.features.size() * sizeof(double)));
  return out;
}

}  // namespace lowshot
