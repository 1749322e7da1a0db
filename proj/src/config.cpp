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

#include "lowshot/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "lowshot/common.hpp"

namespace lowshot {

using nlohmann::json;
namespace fs = std::filesystem;

bool RunConfig::needs(EncoderFamily f) const {
  return std::any_of(methods.begin(), methods.end(), [f](const MethodSpec& m) { return m.encoder == f; });
}

std::string ConfigIssues::joined() const {
  std::string out;
  for (const auto& e : errors) out += "  - " + e + "\n";
  return out;
}

namespace {

/// Strict reader over one JSON object; problems are appended, never thrown.
class Section {
 public:
  Section(const json* j, std::string path, ConfigIssues& issues)
      : j_(j), path_(std::move(path)), issues_(issues) {
    if (j_ && !j_->is_object()) {
      fail("expected an object");
      j_ = nullptr;
    }
  }

  /// Flags keys outside `allowed`.
  void allow(std::initializer_list<std::string_view> allowed) const {
    if (!j_) return;
    for (const auto& [key, value] : j_->items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        issues_.errors.push_back("unknown key '" + key + "'" + (path_.empty() ? "" : " in " + path_));
      }
    }
  }

  template <typename T>
  bool read(const char* key, T& out) const {
    if (!j_ || !j_->contains(key)) return false;
    try {
      out = j_->at(key).get<T>();
      return true;
    } catch (const json::exception&) {
      issues_.errors.push_back(where(key) + ": wrong type");
      return false;
    }
  }

  bool has(const char* key) const { return j_ && j_->contains(key); }
  const json* raw(const char* key) const { return has(key) ? &j_->at(key) : nullptr; }

  Section child(const char* key) const { return Section(raw(key), where(key), issues_); }

  std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  void fail(const std::string& msg) const {
    issues_.errors.push_back((path_.empty() ? std::string() : path_ + ": ") + msg);
  }

 private:
  const json* j_;
  std::string path_;
  ConfigIssues& issues_;
};

/// Runs a throwing validator and records its message.
template <typename F>
void collect(ConfigIssues& issues, const std::string& prefix, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    issues.errors.push_back(prefix + e.what());
  }
}

void read_augment(const Section& s, AugmentSpec& a) {
  s.allow({"min_crop_frac", "max_crop_frac", "brightness", "contrast", "saturation", "hue"});
  s.read("min_crop_frac", a.min_crop_frac);
  s.read("max_crop_frac", a.max_crop_frac);
  s.read("brightness", a.brightness);
  s.read("contrast", a.contrast);
  s.read("saturation", a.saturation);
  s.read("hue", a.hue);
}

json augment_to_json(const AugmentSpec& a) {
  return json{{"min_crop_frac", a.min_crop_frac}, {"max_crop_frac", a.max_crop_frac},
              {"brightness", a.brightness},       {"contrast", a.contrast},
              {"saturation", a.saturation},       {"hue", a.hue}};
}

/// Image files a class directory would contribute, without decoding them.
std::vector<std::pair<std::string, std::size_t>> count_class_files(const fs::path& root) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || name.empty() || name[0] == '.') continue;
    std::size_t n = 0;
    for (const auto& f : fs::directory_iterator(entry.path())) {
      const std::string fname = f.path().filename().string();
      if (f.is_regular_file() && !fname.empty() && fname[0] != '.') ++n;
    }
    out.emplace_back(name, n);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

RunConfig parse_run_config(const json& j, ConfigIssues& issues) {
  RunConfig c;
  const Section top(&j, "", issues);
  top.allow({"dataset", "schedule", "methods", "encoders", "heads", "output_dir", "run_id", "workers",
             "deterministic_mode", "cache_dir", "audit"});

  {
    const Section s = top.child("dataset");
    s.allow({"root", "test_fraction", "split_seed"});
    if (!s.read("root", c.dataset.root)) issues.errors.push_back("dataset.root is required");
    s.read("test_fraction", c.dataset.test_fraction);
    s.read("split_seed", c.dataset.split_seed);
    if (!(c.dataset.test_fraction > 0.0 && c.dataset.test_fraction < 1.0)) {
      issues.errors.push_back("dataset.test_fraction must be in (0, 1)");
    }
  }

  {
    const Section s = top.child("schedule");
    s.allow({"shots_per_class", "seeds"});
    s.read("shots_per_class", c.schedule.shots_per_class);
    s.read("seeds", c.schedule.seeds);
    const auto& shots = c.schedule.shots_per_class;
    if (shots.empty()) issues.errors.push_back("schedule.shots_per_class must not be empty");
    for (int n : shots) {
      if (n < 1) issues.errors.push_back("schedule: shots must be >= 1 (got " + std::to_string(n) + ")");
    }
    for (std::size_t i = 1; i < shots.size(); ++i) {
      if (shots[i] >= shots[i - 1]) {
        issues.errors.push_back("schedule: shots must be strictly decreasing");
        break;
      }
    }
    if (c.schedule.seeds.empty()) issues.errors.push_back("schedule.seeds must not be empty");
    const std::set<std::uint64_t> unique(c.schedule.seeds.begin(), c.schedule.seeds.end());
    if (unique.size() != c.schedule.seeds.size()) issues.errors.push_back("schedule.seeds must be distinct");
  }

  std::vector<std::string> names = method_order();
  if (top.read("methods", names)) {
    std::set<std::string> seen;
    for (const auto& n : names) {
      if (!seen.insert(n).second) issues.errors.push_back("methods: '" + n + "' listed twice");
    }
    if (names.empty()) issues.errors.push_back("methods must not be empty");
  }
  for (const auto& n : names) {
    collect(issues, "methods: ", [&] { c.methods.push_back(default_method(n)); });
  }

  {
    const Section heads = top.child("heads");
    if (const json* hj = top.raw("heads"); hj && hj->is_object()) {
      for (const auto& [name, override_j] : hj->items()) {
        auto it = std::find_if(c.methods.begin(), c.methods.end(),
                               [&](const MethodSpec& m) { return m.name == name; });
        if (it == c.methods.end()) {
          issues.errors.push_back("heads: '" + name + "' is not a selected method");
          continue;
        }
        collect(issues, "heads." + name + ": ", [&] {
          if (!override_j.is_object()) throw ConfigError("expected an object");
          json merged = to_json(it->head);
          for (const auto& [k, v] : override_j.items()) {
            if (k == "kind" && v != merged["kind"]) throw ConfigError("kind cannot change");
            if (k == "metric" || k == "kind" || merged.contains(k)) {
              merged[k] = v;
            } else {
              throw ConfigError("unknown key '" + k + "'");
            }
          }
          // Naming a gamma without a rule means a fixed gamma.
          if (override_j.contains("gamma") && !override_j.contains("gamma_rule")) {
            merged["gamma_rule"] = "fixed";
          }
          it->head = head_spec_from_json(merged);
          it->validate();
        });
      }
    }
  }

  {
    const Section enc = top.child("encoders");
    enc.allow({"architecture", "discriminative", "self_supervised"});
    const Section a = enc.child("architecture");
    a.allow({"backbone_id", "input_size", "stem_kernel", "stem_stride", "stem_width", "stage_widths",
             "local_layer"});
    EncoderSpec& arch = c.architecture;
    a.read("backbone_id", arch.backbone_id);
    a.read("input_size", arch.input_size);
    a.read("stem_kernel", arch.trunk.stem_kernel);
    a.read("stem_stride", arch.trunk.stem_stride);
    a.read("stem_width", arch.trunk.stem_width);
    a.read("stage_widths", arch.trunk.stage_widths);
    a.read("local_layer", arch.local_layer);
    collect(issues, "encoders.architecture: ", [&] { arch.validate(); });

    const Section d = enc.child("discriminative");
    d.allow({"checkpoint", "pretrain"});
    d.read("checkpoint", c.discriminative.checkpoint);
    const Section p = d.child("pretrain");
    p.allow({"num_images", "num_classes", "epochs", "batch_size", "learning_rate", "seed"});
    p.read("num_images", c.pretrain.num_images);
    p.read("num_classes", c.pretrain.num_classes);
    p.read("epochs", c.pretrain.epochs);
    p.read("batch_size", c.pretrain.batch_size);
    p.read("learning_rate", c.pretrain.learning_rate);
    p.read("seed", c.pretrain.seed);
    collect(issues, "encoders.discriminative.pretrain: ", [&] { c.pretrain.validate(); });

    const Section ss = enc.child("self_supervised");
    ss.allow({"checkpoint", "dim"});
    ss.read("checkpoint", c.self_supervised.checkpoint);
    const Section dim = ss.child("dim");
    dim.allow({"epochs", "batch_size", "learning_rate", "temperature", "projection_dim", "seed", "view_a",
               "view_b"});
    dim.read("epochs", c.dim.epochs);
    dim.read("batch_size", c.dim.batch_size);
    dim.read("learning_rate", c.dim.learning_rate);
    dim.read("temperature", c.dim.temperature);
    dim.read("projection_dim", c.dim.projection_dim);
    dim.read("seed", c.dim.seed);
    read_augment(dim.child("view_a"), c.dim.view_a);
    read_augment(dim.child("view_b"), c.dim.view_b);
    // Views are produced directly at the encoder resolution.
    for (AugmentSpec* v : {&c.dim.view_a, &c.dim.view_b}) {
      v->out_height = arch.input_size;
      v->out_width = arch.input_size;
    }
    collect(issues, "encoders.self_supervised.dim: ", [&] { c.dim.validate(); });
  }

  top.read("output_dir", c.output_dir);
  top.read("run_id", c.run_id);
  top.read("workers", c.workers);
  top.read("deterministic_mode", c.deterministic_mode);
  top.read("cache_dir", c.cache_dir);
  if (c.workers < 1) issues.errors.push_back("workers must be >= 1");
  if (c.output_dir.empty()) issues.errors.push_back("output_dir must not be empty");
  if (c.run_id.find('/') != std::string::npos) issues.errors.push_back("run_id must not contain '/'");

  {
    const Section s = top.child("audit");
    s.allow({"n_min", "bright_fraction", "ita_thresholds", "positive_class"});
    s.read("n_min", c.audit.n_min);
    s.read("bright_fraction", c.audit.bright_fraction);
    s.read("positive_class", c.audit.positive_class);
    if (const json* t = s.raw("ita_thresholds")) {
      collect(issues, "audit.ita_thresholds: ", [&] { c.audit.thresholds = ita_thresholds_from_json(*t); });
    }
    if (c.audit.n_min < 1) issues.errors.push_back("audit.n_min must be >= 1");
    if (!(c.audit.bright_fraction > 0.0 && c.audit.bright_fraction <= 1.0)) {
      issues.errors.push_back("audit.bright_fraction must be in (0, 1]");
    }
  }
  return c;
}

void check_run_config(const RunConfig& cfg, ConfigIssues& issues) {
  const fs::path root(cfg.dataset.root);
  if (cfg.dataset.root.empty()) return;
  if (!fs::is_directory(root)) {
    issues.errors.push_back("dataset root does not exist: " + cfg.dataset.root);
  } else {
    const auto classes = count_class_files(root);
    if (classes.empty()) issues.errors.push_back("no class subdirectories in " + cfg.dataset.root);
    std::size_t min_train = SIZE_MAX;
    std::string smallest;
    for (const auto& [name, n] : classes) {
      if (n < 2) {
        issues.errors.push_back("class '" + name + "' has fewer than 2 images");
        continue;
      }
      const auto test = static_cast<std::size_t>(std::clamp<long>(
          std::lround(cfg.dataset.test_fraction * static_cast<double>(n)), 1L, static_cast<long>(n) - 1));
      if (n - test < min_train) {
        min_train = n - test;
        smallest = name;
      }
    }
    if (!cfg.schedule.shots_per_class.empty() && min_train != SIZE_MAX) {
      const auto max_shot = static_cast<std::size_t>(
          *std::max_element(cfg.schedule.shots_per_class.begin(), cfg.schedule.shots_per_class.end()));
      if (max_shot > min_train) {
        issues.errors.push_back("schedule: " + std::to_string(max_shot) + " shots exceed the " +
                                std::to_string(min_train) + " training images of class '" + smallest + "'");
      }
    }
  }
  if (cfg.needs(EncoderFamily::discriminative) && !cfg.discriminative.checkpoint.empty() &&
      !fs::is_regular_file(cfg.discriminative.checkpoint)) {
    issues.errors.push_back("discriminative checkpoint not found: " + cfg.discriminative.checkpoint);
  }
  if (cfg.needs(EncoderFamily::self_supervised) && !cfg.self_supervised.checkpoint.empty() &&
      !fs::is_regular_file(cfg.self_supervised.checkpoint)) {
    issues.errors.push_back("self-supervised checkpoint not found: " + cfg.self_supervised.checkpoint);
  }
}

json to_json(const RunConfig& c) {
  json heads = json::object();
  json names = json::array();
  for (const auto& m : c.methods) {
    names.push_back(m.name);
    heads[m.name] = to_json(m.head);
  }
  const EncoderSpec& a = c.architecture;
  json dim = to_json(c.dim);
  dim["view_a"] = augment_to_json(c.dim.view_a);
  dim["view_b"] = augment_to_json(c.dim.view_b);
  json pretrain = to_json(c.pretrain);
  pretrain.erase("corpus");
  return json{
      {"dataset", {{"root", c.dataset.root}, {"test_fraction", c.dataset.test_fraction}, {"split_seed", c.dataset.split_seed}}},
      {"schedule", {{"shots_per_class", c.schedule.shots_per_class}, {"seeds", c.schedule.seeds}}},
      {"methods", names},
      {"heads", heads},
      {"encoders",
       {{"architecture",
         {{"backbone_id", a.backbone_id},
          {"input_size", a.input_size},
          {"stem_kernel", a.trunk.stem_kernel},
          {"stem_stride", a.trunk.stem_stride},
          {"stem_width", a.trunk.stem_width},
          {"stage_widths", a.trunk.stage_widths},
          {"local_layer", a.local_layer}}},
        {"discriminative", {{"checkpoint", c.discriminative.checkpoint}, {"pretrain", pretrain}}},
        {"self_supervised", {{"checkpoint", c.self_supervised.checkpoint}, {"dim", dim}}}}},
      {"output_dir", c.output_dir},
      {"run_id", c.run_id},
      {"workers", c.workers},
      {"deterministic_mode", c.deterministic_mode},
      {"cache_dir", c.cache_dir},
      {"audit",
       {{"n_min", c.audit.n_min},
        {"bright_fraction", c.audit.bright_fraction},
        {"positive_class", c.audit.positive_class},
        {"ita_thresholds", to_json(c.audit.thresholds)}}}};
}

json read_config_json(const std::string& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path);
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": not valid JSON: " + e.what());
  }
  if (j.is_object() && j.contains("lowshot_manifest")) {
    if (!j.contains("config")) throw ConfigError(path + ": manifest has no config");
    return j.at("config");
  }
  return j;
}

std::uint64_t config_fingerprint(const RunConfig& cfg) {
  json j = to_json(cfg);
  for (const char* k : {"output_dir", "run_id", "workers", "cache_dir", "audit"}) j.erase(k);
  return fnv1a(j.dump());
}

}  // namespace lowshot
