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

// lowshot: validate a run config, run the shot sweep, audit subgroups, re-emit reports.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "lowshot/app.hpp"
#include "lowshot/common.hpp"
#include "lowshot/config.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRun = 3;

struct Overrides {
  std::string output_dir;
  std::string run_id;
  std::string cache_dir;
  int workers = 0;
};

/// Parses, applies flag and environment overrides, then runs every check.
lowshot::RunConfig load_config(const std::string& path, const Overrides& o) {
  nlohmann::json j = lowshot::read_config_json(path);
  if (j.is_object() && !j.contains("output_dir")) {
    if (const char* root = std::getenv("LOWSHOT_OUTPUT_ROOT"); root && *root) j["output_dir"] = root;
  }
  if (!o.output_dir.empty()) j["output_dir"] = o.output_dir;
  if (!o.run_id.empty()) j["run_id"] = o.run_id;
  if (!o.cache_dir.empty()) j["cache_dir"] = o.cache_dir;
  if (o.workers > 0) j["workers"] = o.workers;
  lowshot::ConfigIssues issues;
  lowshot::RunConfig cfg = lowshot::parse_run_config(j, issues);
  if (issues.ok()) lowshot::check_run_config(cfg, issues);
  if (!issues.ok()) {
    throw lowshot::ConfigError(path + ": " + std::to_string(issues.errors.size()) +
                               " problem(s)\n" + issues.joined());
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-shot image classification benchmark"};
  app.require_subcommand(1);
  int verbosity = 1;
  app.add_flag("-v,--verbose", [&](std::int64_t n) { verbosity = 1 + static_cast<int>(n); }, "More progress output");
  app.add_flag("-q,--quiet", [&](std::int64_t) { verbosity = 0; }, "No progress output");

  std::string config_path;
  Overrides overrides;

  auto* validate = app.add_subcommand("validate", "Check a config and print it with defaults resolved");
  validate->add_option("config", config_path, "Config file (JSON) or run manifest")->required();

  auto* run = app.add_subcommand("run", "Run the shot sweep and write a results directory");
  bool dry_run = false, save_predictions = false;
  run->add_option("config", config_path, "Config file (JSON) or run manifest")->required();
  run->add_flag("--dry-run", dry_run, "Print the cell plan and write nothing");
  run->add_flag("--save-predictions", save_predictions, "Persist per-cell test predictions (needed by audit)");
  run->add_option("--output-dir", overrides.output_dir, "Results root (overrides config and LOWSHOT_OUTPUT_ROOT)");
  run->add_option("--run-id", overrides.run_id, "Results subdirectory name");
  run->add_option("--cache-dir", overrides.cache_dir, "Encoder and embedding cache");
  run->add_option("--workers", overrides.workers, "Parallel cells")->check(CLI::PositiveNumber);

  auto* audit = app.add_subcommand("audit", "Skin-tone subgroup report over saved predictions");
  std::string run_dir;
  lowshot::AuditOptions audit_opt;
  std::string audit_method;
  std::optional<int> audit_shots;
  std::optional<std::uint64_t> audit_seed;
  audit->add_option("run_dir", run_dir, "Results directory of a finished run")->required();
  audit->add_option("--tones", audit_opt.tone_source,
                    "estimate (ITA from images), dataset (tones.csv in the dataset) or a CSV path")
      ->capture_default_str();
  audit->add_option("--method", audit_method, "Only this method");
  audit->add_option("--shots", audit_shots, "Only this shot count");
  audit->add_option("--seed", audit_seed, "Only this seed");

  auto* report = app.add_subcommand("report", "Re-emit tables and curves from matrix.json");
  std::string matrix_path;
  bool allow_partial = false;
  std::string print_format;
  report->add_option("matrix", matrix_path, "matrix.json or the directory holding it")->required();
  report->add_flag("--allow-partial", allow_partial, "Render incomplete matrices (missing cells stay empty)");
  report->add_option("--print", print_format, "Also print the table: csv, json or markdown");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  lowshot::set_log_level(verbosity);

  try {
    if (*validate) {
      const lowshot::RunConfig cfg = load_config(config_path, overrides);
      std::cout << lowshot::to_json(cfg).dump(2) << "\n";
      std::cerr << "config ok: " << lowshot::plan_cells(cfg).size() << " cells\n";
      return 0;
    }
    if (*run) {
      const lowshot::RunConfig cfg = load_config(config_path, overrides);
      const lowshot::RunOutcome out = lowshot::execute_run(cfg, {dry_run, save_predictions});
      if (dry_run) {
        std::cout << out.plan.size() << " cells, results would go to " << out.run_dir << "\n";
        for (const auto& line : out.plan) std::cout << line << "\n";
        return 0;
      }
      std::cout << out.run_dir << "\n";
      return 0;
    }
    if (*audit) {
      if (!audit_method.empty()) audit_opt.method = audit_method;
      audit_opt.shots = audit_shots;
      audit_opt.seed = audit_seed;
      lowshot::execute_audit(run_dir, audit_opt);
      return 0;
    }
    if (*report) {
      namespace fs = std::filesystem;
      fs::path p(matrix_path);
      if (fs::is_directory(p)) p /= "matrix.json";
      if (!fs::is_regular_file(p)) throw lowshot::ConfigError("matrix file not found: " + p.string());
      const lowshot::ResultMatrix m =
          lowshot::matrix_from_json(nlohmann::json::parse(lowshot::read_text_file(p.string())));
      lowshot::write_reports(m, p.parent_path().string(), allow_partial);
      if (!print_format.empty()) {
        std::cout << lowshot::render_table(m, lowshot::parse_table_format(print_format), allow_partial);
      }
      return 0;
    }
  } catch (const lowshot::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRun;
  }
  return 0;
}
