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

#include "lowshot/app.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "lowshot/common.hpp"
#include "lowshot/fairness.hpp"

namespace lowshot {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kManifestVersion = 1;

std::string cell_file_stem(const std::string& method, int shots, std::uint64_t seed) {
  std::string m = method;
  std::replace(m.begin(), m.end(), ' ', '-');
  return m + "__n" + std::to_string(shots) + "__s" + std::to_string(seed);
}

/// Loads the checkpoint, reuses a cached one, or trains and caches.
template <typename TrainFn>
Encoder obtain_encoder(const std::string& checkpoint, const std::string& cache_dir,
                       const std::string& kind, std::uint64_t key, TrainFn&& train) {
  if (!checkpoint.empty()) {
    log_line(1, "loading " + kind + " encoder from " + checkpoint);
    return load_encoder(checkpoint);
  }
  std::string cached;
  if (!cache_dir.empty()) {
    fs::create_directories(fs::path(cache_dir) / "encoders");
    cached = (fs::path(cache_dir) / "encoders" / (kind + "_" + hex64(key) + ".bin")).string();
    if (fs::is_regular_file(cached)) {
      log_line(1, "reusing cached " + kind + " encoder " + cached);
      return load_encoder(cached);
    }
  }
  log_line(1, "training " + kind + " encoder");
  Encoder enc = train();
  if (!cached.empty()) save_encoder(cached, enc);
  return enc;
}

void write_json(const fs::path& p, const json& j) { write_text_file(p.string(), j.dump(2) + "\n"); }

}  // namespace

std::vector<std::string> plan_cells(const RunConfig& cfg) {
  std::vector<std::string> out;
  for (int n : cfg.schedule.shots_per_class) {
    for (const auto& m : cfg.methods) {
      for (std::uint64_t s : cfg.schedule.seeds) {
        out.push_back("shots=" + std::to_string(n) + " method=" + m.name + " seed=" + std::to_string(s));
      }
    }
  }
  return out;
}

std::string run_directory(const RunConfig& cfg) {
  const std::string id = cfg.run_id.empty() ? "run-" + hex64(config_fingerprint(cfg)) : cfg.run_id;
  return (fs::path(cfg.output_dir) / id).string();
}

void write_reports(const ResultMatrix& m, const std::string& dir, bool allow_partial) {
  const fs::path d(dir);
  write_text_file((d / "table.md").string(), render_table(m, TableFormat::markdown, allow_partial));
  write_text_file((d / "table.csv").string(), render_table(m, TableFormat::csv, allow_partial));
  write_text_file((d / "table.json").string(), render_table(m, TableFormat::json, allow_partial));
  if (m.complete) plot_curves(m, (d / "curves.png").string(), (d / "curves_data.csv").string());
}

RunOutcome execute_run(const RunConfig& cfg, const RunOptions& opt) {
  RunOutcome out;
  out.plan = plan_cells(cfg);
  out.run_dir = run_directory(cfg);
  if (opt.dry_run) return out;
  if (cfg.deterministic_mode) Eigen::setNbThreads(1);

  const fs::path dir(out.run_dir);
  fs::create_directories(dir / "splits");
  const std::uint64_t cfg_fp = config_fingerprint(cfg);

  log_line(1, "loading dataset " + cfg.dataset.root);
  const LabeledDataset full = load_image_directory(cfg.dataset.root);
  full.validate();
  const auto [train, test] = stratified_split(full, cfg.dataset.test_fraction, cfg.dataset.split_seed);
  log_line(1, std::to_string(train.size()) + " train / " + std::to_string(test.size()) + " test images, " +
                  std::to_string(full.num_classes()) + " classes");
  write_id_list((dir / "splits" / "train.txt").string(), train.ids());
  write_id_list((dir / "splits" / "test.txt").string(), test.ids());

  const std::uint64_t data_fp = dataset_fingerprint(full);
  const std::uint64_t train_fp = dataset_fingerprint(train);

  Encoder disc, self;
  BenchEncoders encoders;
  json encoder_manifests = json::object();
  if (cfg.needs(EncoderFamily::discriminative)) {
    const std::uint64_t key = fnv1a(json{{"arch", to_json(cfg.architecture)}, {"pretrain", to_json(cfg.pretrain)}}.dump());
    disc = obtain_encoder(cfg.discriminative.checkpoint, cfg.cache_dir, "discriminative", key,
                          [&] { return pretrain_discriminative(cfg.architecture, cfg.pretrain); });
    encoders.discriminative = &disc;
    encoder_manifests["discriminative"] = disc.manifest();
  }
  if (cfg.needs(EncoderFamily::self_supervised)) {
    const std::uint64_t key = fnv1a(
        json{{"arch", to_json(cfg.architecture)}, {"dim", to_json(cfg.dim)}, {"data", hex64(train_fp)}}.dump());
    // The self-supervised objective sees the training pool only, never test images.
    self = obtain_encoder(cfg.self_supervised.checkpoint, cfg.cache_dir, "self_supervised", key,
                          [&] { return train_dim(train, cfg.architecture, cfg.dim); });
    encoders.self_supervised = &self;
    encoder_manifests["self_supervised"] = self.manifest();
  }

  BenchConfig bench;
  bench.schedule = cfg.schedule;
  bench.methods = cfg.methods;
  bench.workers = cfg.workers;
  bench.keep_predictions = opt.save_predictions;
  bench.config_fingerprint = cfg_fp;
  if (!cfg.cache_dir.empty()) bench.embedding_cache_dir = (fs::path(cfg.cache_dir) / "embeddings").string();
  if (!bench.embedding_cache_dir.empty()) fs::create_directories(bench.embedding_cache_dir);

  const std::size_t total = out.plan.size();
  std::size_t done = 0;
  log_line(1, "running " + std::to_string(total) + " cells");
  out.matrix = run_shot_curve(bench, train, test, encoders, [&](const ResultCell& c) {
    ++done;
    log_line(1, "[" + std::to_string(done) + "/" + std::to_string(total) + "] " + c.method + " N=" +
                    std::to_string(c.shots) + " seed=" + std::to_string(c.seed) + " accuracy " +
                    format_fixed(c.accuracy * 100.0, 2));
  });

  // Shot-subset manifests: reproducible from the seed, recorded for audit.
  json shot_files = json::array();
  fs::create_directories(dir / "splits" / "shots");
  for (int n : cfg.schedule.shots_per_class) {
    for (std::uint64_t s : cfg.schedule.seeds) {
      const auto ids = subsample_shots(train, n, s).ids();
      const std::string rel = "splits/shots/n" + std::to_string(n) + "__s" + std::to_string(s) + ".txt";
      write_id_list((dir / rel).string(), ids);
      shot_files.push_back(json{{"shots", n}, {"seed", s}, {"file", rel}, {"ids_fingerprint", hex64(id_set_fingerprint(ids))}});
    }
  }

  json prediction_files = json::array();
  if (opt.save_predictions) {
    fs::create_directories(dir / "predictions");
    const std::vector<int> truth = test.labels();
    for (const auto& c : out.matrix.cells) {
      std::ostringstream csv;
      csv << "id,truth,pred\n";
      for (std::size_t i = 0; i < c.predictions.size(); ++i) {
        csv << test.samples[i].id << ',' << truth[i] << ',' << c.predictions[i] << '\n';
      }
      const std::string rel = "predictions/" + cell_file_stem(c.method, c.shots, c.seed) + ".csv";
      write_text_file((dir / rel).string(), csv.str());
      prediction_files.push_back(json{{"method", c.method}, {"shots", c.shots}, {"seed", c.seed}, {"file", rel}});
    }
  }

  write_text_file((dir / "matrix.csv").string(), render_matrix_csv(out.matrix));
  write_json(dir / "matrix.json", matrix_to_json(out.matrix));
  json manifest{{"lowshot_manifest", kManifestVersion},
                {"created", utc_timestamp()},
                {"config", to_json(cfg)},
                {"config_fingerprint", hex64(cfg_fp)},
                {"complete", out.matrix.complete},
                {"failure", out.matrix.failure},
                {"dataset",
                 {{"root", cfg.dataset.root},
                  {"class_names", full.class_names},
                  {"fingerprint", hex64(data_fp)},
                  {"n_train", train.size()},
                  {"n_test", test.size()},
                  {"train_ids_fingerprint", hex64(id_set_fingerprint(train.ids()))},
                  {"test_ids_fingerprint", hex64(id_set_fingerprint(test.ids()))}}},
                {"splits", {{"train", "splits/train.txt"}, {"test", "splits/test.txt"}, {"shots", shot_files}}},
                {"encoders", encoder_manifests},
                {"predictions", prediction_files}};
  write_json(dir / "manifest.json", manifest);

  if (!out.matrix.complete) {
    write_reports(out.matrix, out.run_dir, true);
    throw RunError("run incomplete: " + out.matrix.failure);
  }
  write_reports(out.matrix, out.run_dir);
  log_line(1, "results written to " + out.run_dir);
  return out;
}

// ---------------------------------------------------------------------------
// Audit

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::unordered_map<std::string, SkinToneBin> read_tone_csv(const std::string& path) {
  std::unordered_map<std::string, SkinToneBin> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && line.rfind("id,", 0) == 0)) continue;
    const auto f = split_csv_line(line);
    // Accepts id,tone_bin as well as the id,ita_degrees,tone_bin,... layout written by audits.
    const std::string& bin = f.size() >= 3 ? f[2] : (f.size() == 2 ? f[1] : std::string());
    const auto parsed = parse_tone_bin(bin);
    if (!parsed) throw DataError(path + ":" + std::to_string(lineno) + ": unknown tone bin '" + bin + "'");
    out[f[0]] = *parsed;
  }
  return out;
}

}  // namespace

void execute_audit(const std::string& run_dir, const AuditOptions& opt) {
  const fs::path dir(run_dir);
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::is_regular_file(manifest_path)) throw ConfigError("no manifest.json in " + run_dir);
  const json manifest = json::parse(read_text_file(manifest_path.string()));
  ConfigIssues issues;
  const RunConfig cfg = parse_run_config(manifest.at("config"), issues);
  if (!issues.ok()) throw ConfigError("manifest config is invalid:\n" + issues.joined());

  const json& preds = manifest.at("predictions");
  if (preds.empty()) {
    throw ConfigError("no saved predictions in " + run_dir + "; rerun with --save-predictions");
  }

  const std::vector<std::string> test_ids = read_id_list((dir / "splits" / "test.txt").string());
  std::vector<SkinToneBin> bins(test_ids.size());
  std::ostringstream tones_csv;
  if (opt.tone_source == "estimate" || opt.tone_source == "dataset") {
    const LabeledDataset full = load_image_directory(cfg.dataset.root);
    const LabeledDataset test = select_ids(full, test_ids, SplitTag::test);
    std::unordered_map<std::string, const ImageSample*> by_id;
    for (const auto& s : test.samples) by_id.emplace(s.id, &s);
    ItaOptions ita;
    ita.thresholds = cfg.audit.thresholds;
    ita.bright_fraction = cfg.audit.bright_fraction;
    tones_csv << (opt.tone_source == "estimate" ? "id,ita_degrees,tone_bin,n_pixels_used\n" : "id,tone_bin\n");
    for (std::size_t i = 0; i < test_ids.size(); ++i) {
      const ImageSample& s = *by_id.at(test_ids[i]);
      if (opt.tone_source == "estimate") {
        const ToneEstimate e = estimate_ita(s.pixels, std::nullopt, ita);
        bins[i] = e.bin;
        tones_csv << s.id << ',' << format_fixed(e.ita_degrees, 6) << ',' << to_string(e.bin) << ','
                  << e.n_pixels_used << '\n';
      } else {
        if (!s.tone_bin) throw DataError("test sample " + s.id + " has no tone metadata in the dataset");
        bins[i] = *s.tone_bin;
        tones_csv << s.id << ',' << to_string(*s.tone_bin) << '\n';
      }
    }
  } else {
    const auto tones = read_tone_csv(opt.tone_source);
    tones_csv << "id,tone_bin\n";
    for (std::size_t i = 0; i < test_ids.size(); ++i) {
      const auto it = tones.find(test_ids[i]);
      if (it == tones.end()) throw DataError(opt.tone_source + ": no tone bin for test sample " + test_ids[i]);
      bins[i] = it->second;
      tones_csv << test_ids[i] << ',' << to_string(it->second) << '\n';
    }
  }

  json cells = json::array();
  std::ostringstream csv;
  csv << "method,shots,seed,bin,n,n_correct,accuracy,tpr,fpr,small_n\n";
  std::size_t audited = 0;
  for (const auto& p : preds) {
    const std::string method = p.at("method").get<std::string>();
    const int shots = p.at("shots").get<int>();
    const auto seed = p.at("seed").get<std::uint64_t>();
    if ((opt.method && *opt.method != method) || (opt.shots && *opt.shots != shots) ||
        (opt.seed && *opt.seed != seed)) {
      continue;
    }
    const fs::path file = dir / p.at("file").get<std::string>();
    if (!fs::is_regular_file(file)) {
      throw DataError("missing predictions file " + file.string() + "; rerun with --save-predictions");
    }
    std::istringstream in(read_text_file(file.string()));
    std::string line;
    std::getline(in, line);
    std::vector<int> pred, truth;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      if (f.size() != 3 || row >= test_ids.size() || f[0] != test_ids[row]) {
        throw DataError(file.string() + ": rows do not follow the test split");
      }
      truth.push_back(std::stoi(f[1]));
      pred.push_back(std::stoi(f[2]));
      ++row;
    }
    if (row != test_ids.size()) throw DataError(file.string() + ": wrong number of rows");
    const SubgroupReport r = subgroup_report(pred, truth, bins, cfg.audit.n_min, cfg.audit.positive_class);
    cells.push_back(json{{"method", method}, {"shots", shots}, {"seed", seed},
                         {"report", to_json(r, cfg.audit.thresholds)}});
    // Per-cell rows reuse the standalone audit CSV layout with a cell prefix.
    std::istringstream rows(render_audit_csv(r));
    std::getline(rows, line);
    std::string m = method;
    if (m.find(',') != std::string::npos) m = '"' + m + '"';
    while (std::getline(rows, line)) csv << m << ',' << shots << ',' << seed << ',' << line << '\n';
    ++audited;
  }
  if (audited == 0) throw ConfigError("no saved predictions match the requested cell");

  write_text_file((dir / "tones.csv").string(), tones_csv.str());
  write_text_file((dir / "audit.csv").string(), csv.str());
  write_json(dir / "audit.json", json{{"tone_source", opt.tone_source},
                                      {"n_min", cfg.audit.n_min},
                                      {"ita_thresholds", to_json(cfg.audit.thresholds)},
                                      {"cells", std::move(cells)}});
  log_line(1, "audited " + std::to_string(audited) + " cells into " + run_dir);
}

}  // namespace lowshot
