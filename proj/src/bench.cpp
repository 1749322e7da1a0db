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

#include "lowshot/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>
#include <unordered_map>

#include "lowshot/common.hpp"

namespace lowshot {

using nlohmann::json;

std::string_view to_string(Representation r) {
  switch (r) {
    case Representation::raw_image: return "raw_image";
    case Representation::global: return "global";
    case Representation::local: return "local";
  }
  return "unknown";
}

namespace {

Representation parse_representation(std::string_view s) {
  if (s == "raw_image") return Representation::raw_image;
  if (s == "global") return Representation::global;
  if (s == "local") return Representation::local;
  throw ConfigError("unknown representation: " + std::string(s));
}

struct MethodShape {
  EncoderFamily encoder;
  HeadKind head;
  Representation representation;
};

MethodShape implied_shape(std::size_t rank) {
  const EncoderFamily enc = rank < 4 ? EncoderFamily::self_supervised : EncoderFamily::discriminative;
  switch (rank % 4) {
    case 0:
      return {enc, HeadKind::fine_tune,
              rank < 4 ? Representation::local : Representation::raw_image};
    case 1: return {enc, HeadKind::knn, Representation::global};
    case 2: return {enc, HeadKind::random_forest, Representation::global};
    default: return {enc, HeadKind::rbf_svm, Representation::global};
  }
}

}  // namespace

const std::vector<std::string>& method_order() {
  static const std::vector<std::string> names{"DIM", "DIM_KNN", "DIM_Random Forest", "DIM_RBF SVM",
                                              "RES", "RES_KNN", "RES_Random Forest", "RES_RBF SVM"};
  return names;
}

std::size_t method_rank(std::string_view name) {
  const auto& names = method_order();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("unknown method: " + std::string(name));
  return static_cast<std::size_t>(it - names.begin());
}

void MethodSpec::validate() const {
  const MethodShape s = implied_shape(method_rank(name));
  if (encoder != s.encoder || head.kind() != s.head || representation != s.representation) {
    throw ConfigError("method " + name + ": encoder, head and representation must be " +
                      std::string(to_string(s.encoder)) + ", " + std::string(to_string(s.head)) +
                      ", " + std::string(to_string(s.representation)));
  }
  if (s.head == HeadKind::fine_tune) {
    const auto& p = std::get<FineTuneParams>(head.params);
    const auto want = s.representation == Representation::local ? FineTuneInput::local_representations
                                                                : FineTuneInput::raw_images;
    if (p.input != want) throw ConfigError("method " + name + ": fine-tune input does not match");
  }
  head.validate();
}

MethodSpec default_method(std::string_view name) {
  const MethodShape s = implied_shape(method_rank(name));
  MethodSpec m;
  m.name = std::string(name);
  m.encoder = s.encoder;
  m.representation = s.representation;
  switch (s.head) {
    case HeadKind::knn: m.head.params = KnnParams{}; break;
    case HeadKind::random_forest: m.head.params = ForestParams{}; break;
    case HeadKind::rbf_svm: m.head.params = SvmParams{}; break;
    case HeadKind::fine_tune: {
      FineTuneParams p;
      p.input = s.representation == Representation::local ? FineTuneInput::local_representations
                                                          : FineTuneInput::raw_images;
      m.head.params = p;
      break;
    }
  }
  return m;
}

json to_json(const MethodSpec& m) {
  return json{{"name", m.name},
              {"encoder", to_string(m.encoder)},
              {"representation", to_string(m.representation)},
              {"head", to_json(m.head)}};
}

// ---------------------------------------------------------------------------
// ResultMatrix

bool ResultMatrix::has_all_cells() const {
  std::set<std::tuple<std::string, int, std::uint64_t>> seen;
  for (const auto& c : cells) {
    if (!seen.emplace(c.method, c.shots, c.seed).second) return false;
  }
  for (const auto& m : methods) {
    for (int n : schedule.shots_per_class) {
      for (std::uint64_t s : schedule.seeds) {
        if (!seen.count({m.name, n, s})) return false;
      }
    }
  }
  return seen.size() == methods.size() * schedule.shots_per_class.size() * schedule.seeds.size();
}

const ResultCell* ResultMatrix::find(std::string_view method, int shots, std::uint64_t seed) const {
  for (const auto& c : cells) {
    if (c.method == method && c.shots == shots && c.seed == seed) return &c;
  }
  return nullptr;
}

std::optional<double> ResultMatrix::mean_accuracy(std::string_view method, int shots) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& c : cells) {
    if (c.method == method && c.shots == shots) {
      sum += c.accuracy;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

// ---------------------------------------------------------------------------
// run_shot_curve

namespace {

struct Task {
  std::size_t method;
  std::size_t shot;
  std::size_t seed;
};

/// Representations computed once per run.
struct Features {
  GlobalEmbeddings train_global, test_global;
  LocalEmbeddings train_local, test_local;
};

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace

ResultMatrix run_shot_curve(const BenchConfig& cfg, const LabeledDataset& train,
                            const LabeledDataset& test, const BenchEncoders& encoders,
                            const CellCallback& on_cell) {
  cfg.schedule.validate();
  if (cfg.methods.empty()) throw ConfigError("no methods selected");
  for (const auto& m : cfg.methods) m.validate();
  if (train.class_names != test.class_names) throw DataError("train and test class lists differ");
  if (test.empty()) throw DataError("test set is empty");
  const auto counts = train.class_counts();
  const std::size_t min_class = *std::min_element(counts.begin(), counts.end());
  const int max_shot = cfg.schedule.shots_per_class.front();
  if (static_cast<std::size_t>(max_shot) > min_class) {
    throw ConfigError("largest shot count " + std::to_string(max_shot) +
                      " exceeds the smallest training class (" + std::to_string(min_class) + ")");
  }

  // Train/test disjointness holds for the pools, hence for every subset.
  {
    const auto train_ids = train.ids();
    const std::set<std::string> train_set(train_ids.begin(), train_ids.end());
    for (const auto& s : test.samples) {
      if (train_set.count(s.id)) throw DataError("test sample " + s.id + " is also in the training pool");
    }
  }
  const std::uint64_t test_fp = id_set_fingerprint(test.ids());

  // Frozen representations, one pass per encoder family.
  std::map<EncoderFamily, Features> features;
  const auto encoder_for = [&](EncoderFamily f) -> const Encoder& {
    const Encoder* e = f == EncoderFamily::discriminative ? encoders.discriminative
                                                          : encoders.self_supervised;
    if (!e || !e->ready()) {
      throw ConfigError(std::string(to_string(f)) + " encoder is required but not available");
    }
    return *e;
  };
  for (const auto& m : cfg.methods) {
    const Encoder& enc = encoder_for(m.encoder);
    Features& f = features[m.encoder];
    if (m.representation == Representation::global && f.train_global.labels.empty()) {
      f.train_global = embed_global_cached(enc, train, cfg.embedding_cache_dir);
      f.test_global = embed_global_cached(enc, test, cfg.embedding_cache_dir);
    }
    if (m.representation == Representation::local && f.train_local.labels.empty()) {
      f.train_local = embed_local(enc, train);
      f.test_local = embed_local(enc, test);
    }
  }

  std::unordered_map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < train.size(); ++i) index_of.emplace(train.samples[i].id, i);
  const std::vector<int> test_labels = test.labels();
  const int num_classes = static_cast<int>(train.num_classes());

  std::vector<Task> tasks;
  for (std::size_t si = 0; si < cfg.schedule.shots_per_class.size(); ++si) {
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      for (std::size_t ki = 0; ki < cfg.schedule.seeds.size(); ++ki) tasks.push_back({mi, si, ki});
    }
  }

  const auto run_cell = [&](const Task& t) {
    const MethodSpec& method = cfg.methods[t.method];
    const int shots = cfg.schedule.shots_per_class[t.shot];
    const std::uint64_t seed = cfg.schedule.seeds[t.seed];
    const LabeledDataset subset = subsample_shots(train, shots, seed);
    std::vector<std::size_t> rows;
    rows.reserve(subset.size());
    for (const auto& s : subset.samples) rows.push_back(index_of.at(s.id));
    const std::vector<int> labels = subset.labels();
    const std::uint64_t head_seed = mix_seed(mix_seed(seed, fnv1a(method.name)),
                                             static_cast<std::uint64_t>(shots));

    HeadInput fit_in;
    HeadInput test_in;
    const Features* f = method.representation == Representation::raw_image
                            ? nullptr
                            : &features.at(method.encoder);
    switch (method.representation) {
      case Representation::global:
        fit_in = select_rows(f->train_global.features, rows);
        test_in = f->test_global.features;
        break;
      case Representation::local: {
        LocalInputs a, b;
        for (std::size_t r : rows) a.maps.push_back(&f->train_local.maps[r]);
        for (const auto& fm : f->test_local.maps) b.maps.push_back(&fm);
        fit_in = std::move(a);
        test_in = std::move(b);
        break;
      }
      case Representation::raw_image: {
        const Encoder* enc = &encoder_for(method.encoder);
        ImageInputs a{enc, {}}, b{enc, {}};
        for (std::size_t r : rows) a.images.push_back(&train.samples[r].pixels);
        for (const auto& s : test.samples) b.images.push_back(&s.pixels);
        fit_in = std::move(a);
        test_in = std::move(b);
        break;
      }
    }

    const TrainedHead head = fit(method.head, fit_in, labels, num_classes, head_seed);
    std::vector<int> pred = predict(head, test_in);

    ResultCell cell;
    cell.method = method.name;
    cell.shots = shots;
    cell.seed = seed;
    cell.n_test = static_cast<int>(test_labels.size());
    for (std::size_t i = 0; i < pred.size(); ++i) cell.n_correct += pred[i] == test_labels[i] ? 1 : 0;
    cell.accuracy = static_cast<double>(cell.n_correct) / cell.n_test;
    cell.timestamp = utc_timestamp();
    cell.config_fingerprint = cfg.config_fingerprint;
    cell.train_ids_fingerprint = id_set_fingerprint(subset.ids());
    cell.test_ids_fingerprint = test_fp;
    if (cfg.keep_predictions) cell.predictions = std::move(pred);
    return cell;
  };

  std::vector<std::optional<ResultCell>> results(tasks.size());
  std::vector<std::string> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex callback_mu;
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || failed.load()) return;
      const Task& t = tasks[i];
      try {
        results[i] = run_cell(t);
        if (on_cell) {
          const std::lock_guard lock(callback_mu);
          on_cell(*results[i]);
        }
      } catch (const std::exception& e) {
        errors[i] = "cell (method=" + cfg.methods[t.method].name +
                    ", shots=" + std::to_string(cfg.schedule.shots_per_class[t.shot]) +
                    ", seed=" + std::to_string(cfg.schedule.seeds[t.seed]) + ") failed: " + e.what();
        failed.store(true);
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(tasks.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ResultMatrix out;
  out.schedule = cfg.schedule;
  out.methods = cfg.methods;
  std::vector<std::pair<std::tuple<std::size_t, std::size_t, std::size_t>, ResultCell>> ordered;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!results[i]) continue;
    const Task& t = tasks[i];
    ordered.push_back({{t.shot, method_rank(cfg.methods[t.method].name), t.seed}, std::move(*results[i])});
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [key, cell] : ordered) out.cells.push_back(std::move(cell));
  for (const auto& e : errors) {
    if (!e.empty()) {
      out.failure = e;
      break;
    }
  }
  out.complete = out.failure.empty() && out.has_all_cells();
  return out;
}

// ---------------------------------------------------------------------------
// Tables

TableFormat parse_table_format(std::string_view s) {
  if (s == "csv") return TableFormat::csv;
  if (s == "json") return TableFormat::json;
  if (s == "markdown" || s == "md") return TableFormat::markdown;
  throw ConfigError("unknown table format: " + std::string(s));
}

namespace {

/// Methods present in the matrix, in column order.
std::vector<std::string> table_columns(const ResultMatrix& m) {
  std::vector<std::string> names;
  for (const auto& spec : m.methods) names.push_back(spec.name);
  for (const auto& c : m.cells) {
    if (std::find(names.begin(), names.end(), c.method) == names.end()) names.push_back(c.method);
  }
  std::sort(names.begin(), names.end(),
            [](const auto& a, const auto& b) { return method_rank(a) < method_rank(b); });
  return names;
}

std::string percent_cell(const std::optional<double>& acc) {
  return acc ? format_trimmed(*acc * 100.0, 2) : std::string();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

/// Shortest decimal string that parses back to the same double.
std::string exact_double(double v) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace

std::string render_table(const ResultMatrix& m, TableFormat format, bool allow_partial) {
  if (!allow_partial && !(m.complete && m.has_all_cells())) {
    throw RunError("result matrix is incomplete" + (m.failure.empty() ? "" : ": " + m.failure));
  }
  const std::vector<std::string> cols = table_columns(m);
  std::ostringstream out;
  switch (format) {
    case TableFormat::csv: {
      out << "shots";
      for (const auto& c : cols) out << ',' << csv_field(c);
      out << '\n';
      for (int n : m.schedule.shots_per_class) {
        out << n;
        for (const auto& c : cols) out << ',' << percent_cell(m.mean_accuracy(c, n));
        out << '\n';
      }
      break;
    }
    case TableFormat::markdown: {
      out << "| Shots |";
      for (const auto& c : cols) out << ' ' << c << " |";
      out << "\n|---|";
      for (std::size_t i = 0; i < cols.size(); ++i) out << "---|";
      out << '\n';
      for (int n : m.schedule.shots_per_class) {
        out << "| " << n << " |";
        for (const auto& c : cols) out << ' ' << percent_cell(m.mean_accuracy(c, n)) << " |";
        out << '\n';
      }
      break;
    }
    case TableFormat::json: {
      // Cells are strings so the printed form is preserved verbatim.
      json rows = json::array();
      for (int n : m.schedule.shots_per_class) {
        json values = json::array();
        for (const auto& c : cols) values.push_back(percent_cell(m.mean_accuracy(c, n)));
        rows.push_back(json{{"shots", n}, {"values", std::move(values)}});
      }
      out << json{{"columns", cols}, {"rows", std::move(rows)}, {"unit", "percent"}}.dump(2) << '\n';
      break;
    }
  }
  return out.str();
}

std::string render_matrix_csv(const ResultMatrix& m) {
  std::ostringstream out;
  out << "shots,method,seed,accuracy,n_test\n";
  for (const auto& c : m.cells) {
    out << c.shots << ',' << csv_field(c.method) << ',' << c.seed << ',' << exact_double(c.accuracy)
        << ',' << c.n_test << '\n';
  }
  return out.str();
}

json matrix_to_json(const ResultMatrix& m) {
  json cells = json::array();
  for (const auto& c : m.cells) {
    json jc{{"method", c.method},
            {"shots", c.shots},
            {"seed", c.seed},
            {"accuracy", c.accuracy},
            {"n_test", c.n_test},
            {"n_correct", c.n_correct},
            {"timestamp", c.timestamp},
            {"config_fingerprint", hex64(c.config_fingerprint)},
            {"train_ids_fingerprint", hex64(c.train_ids_fingerprint)},
            {"test_ids_fingerprint", hex64(c.test_ids_fingerprint)}};
    cells.push_back(std::move(jc));
  }
  json methods = json::array();
  for (const auto& spec : m.methods) methods.push_back(to_json(spec));
  return json{{"complete", m.complete},
              {"failure", m.failure},
              {"schedule", {{"shots_per_class", m.schedule.shots_per_class}, {"seeds", m.schedule.seeds}}},
              {"methods", std::move(methods)},
              {"cells", std::move(cells)}};
}

namespace {

std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

}  // namespace

ResultMatrix matrix_from_json(const json& j) {
  try {
    ResultMatrix m;
    m.complete = j.at("complete").get<bool>();
    m.failure = j.value("failure", std::string());
    m.schedule.shots_per_class = j.at("schedule").at("shots_per_class").get<std::vector<int>>();
    m.schedule.seeds = j.at("schedule").at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& jm : j.at("methods")) {
      MethodSpec spec;
      spec.name = jm.at("name").get<std::string>();
      spec.encoder = parse_encoder_family(jm.at("encoder").get<std::string>());
      spec.representation = parse_representation(jm.at("representation").get<std::string>());
      spec.head = head_spec_from_json(jm.at("head"));
      spec.validate();
      m.methods.push_back(std::move(spec));
    }
    for (const auto& jc : j.at("cells")) {
      ResultCell c;
      c.method = jc.at("method").get<std::string>();
      c.shots = jc.at("shots").get<int>();
      c.seed = jc.at("seed").get<std::uint64_t>();
      c.accuracy = jc.at("accuracy").get<double>();
      c.n_test = jc.at("n_test").get<int>();
      c.n_correct = jc.at("n_correct").get<int>();
      c.timestamp = jc.value("timestamp", std::string());
      c.config_fingerprint = parse_hex64(jc.value("config_fingerprint", std::string("0")));
      c.train_ids_fingerprint = parse_hex64(jc.value("train_ids_fingerprint", std::string("0")));
      c.test_ids_fingerprint = parse_hex64(jc.value("test_ids_fingerprint", std::string("0")));
      m.cells.push_back(std::move(c));
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed result matrix: ") + e.what());
  }
}

}  // namespace lowshot
