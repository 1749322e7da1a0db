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

#include <filesystem>

#include "lowshot/config.hpp"
#include "lowshot/synthetic.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json minimal() { return json{{"dataset", {{"root", "/nonexistent"}}}}; }

lowshot::RunConfig parse_ok(const json& j) {
  lowshot::ConfigIssues issues;
  auto c = lowshot::parse_run_config(j, issues);
  EXPECT_TRUE(issues.ok()) << issues.joined();
  return c;
}

std::string parse_errors(const json& j) {
  lowshot::ConfigIssues issues;
  lowshot::parse_run_config(j, issues);
  return issues.joined();
}

TEST(Config, DefaultsResolve) {
  const auto c = parse_ok(minimal());
  EXPECT_EQ(c.schedule.shots_per_class, (std::vector<int>{5120, 639, 79, 40, 20, 10}));
  EXPECT_EQ(c.schedule.seeds.size(), 5u);
  ASSERT_EQ(c.methods.size(), 8u);
  EXPECT_EQ(c.methods[4].name, "RES");
  EXPECT_DOUBLE_EQ(c.dataset.test_fraction, 0.1);
  EXPECT_EQ(c.output_dir, "results");
  EXPECT_TRUE(c.needs(lowshot::EncoderFamily::self_supervised));
  const auto& knn = std::get<lowshot::KnnParams>(c.methods[1].head.params);
  EXPECT_EQ(knn.k, 5);
}

TEST(Config, MisspelledKeyIsNamed) {
  json j = minimal();
  j["sheduledd"] = {{"seeds", {0}}};
  const std::string err = parse_errors(j);
  EXPECT_NE(err.find("unknown key 'sheduledd'"), std::string::npos) << err;
}

TEST(Config, ZeroShotsRejected) {
  json j = minimal();
  j["schedule"] = {{"shots_per_class", {10, 0}}};
  EXPECT_NE(parse_errors(j).find("schedule: shots must be >= 1 (got 0)"), std::string::npos);
}

TEST(Config, AllErrorsCollected) {
  json j = minimal();
  j["dataset"]["test_fraction"] = 1.5;
  j["workers"] = 0;
  j["methods"] = {"RES_KNN", "RES_LASSO"};
  j["heads"] = {{"RES_KNN", {{"kk", 2}}}};
  lowshot::ConfigIssues issues;
  lowshot::parse_run_config(j, issues);
  EXPECT_GE(issues.errors.size(), 4u) << issues.joined();
  const std::string all = issues.joined();
  EXPECT_NE(all.find("test_fraction"), std::string::npos);
  EXPECT_NE(all.find("workers"), std::string::npos);
  EXPECT_NE(all.find("RES_LASSO"), std::string::npos);
  EXPECT_NE(all.find("'kk'"), std::string::npos);
}

TEST(Config, HeadOverridesMerge) {
  json j = minimal();
  j["methods"] = {"DIM_RBF SVM", "RES_Random Forest"};
  j["heads"] = {{"DIM_RBF SVM", {{"gamma", 0.5}}}, {"RES_Random Forest", {{"n_trees", 7}}}};
  const auto c = parse_ok(j);
  const auto& svm = std::get<lowshot::SvmParams>(c.methods[0].head.params);
  EXPECT_EQ(svm.gamma_rule, lowshot::GammaRule::fixed);
  EXPECT_EQ(svm.gamma, 0.5);
  EXPECT_EQ(std::get<lowshot::ForestParams>(c.methods[1].head.params).n_trees, 7);
  EXPECT_NE(parse_errors(json{{"dataset", {{"root", "x"}}}, {"methods", {"RES"}}, {"heads", {{"RES_KNN", {{"k", 1}}}}}})
                .find("not a selected method"),
            std::string::npos);
}

TEST(Config, JsonRoundTripAndFingerprint) {
  json j = minimal();
  j["schedule"] = {{"shots_per_class", {20, 10}}, {"seeds", {3, 4}}};
  j["encoders"] = {{"architecture", {{"input_size", 28}, {"stage_widths", {8, 16}}}}};
  const auto c = parse_ok(j);
  const auto back = parse_ok(lowshot::to_json(c));
  EXPECT_EQ(lowshot::to_json(back), lowshot::to_json(c));
  EXPECT_EQ(lowshot::config_fingerprint(back), lowshot::config_fingerprint(c));

  auto moved = c;
  moved.output_dir = "/elsewhere";
  moved.workers = 8;
  moved.run_id = "x";
  EXPECT_EQ(lowshot::config_fingerprint(moved), lowshot::config_fingerprint(c));
  auto changed = c;
  changed.schedule.seeds = {3};
  EXPECT_NE(lowshot::config_fingerprint(changed), lowshot::config_fingerprint(c));
}

TEST(Config, FilesystemChecks) {
  const fs::path root = fs::path(::testing::TempDir()) / "lowshot_cfg_ds";
  fs::remove_all(root);
  lowshot::write_dataset_tree(lowshot::make_shape_dataset(2, 12, 8, 1), root.string());
  json j = minimal();
  j["dataset"]["root"] = root.string();
  j["schedule"] = {{"shots_per_class", {12, 10}}};
  auto c = parse_ok(j);
  lowshot::ConfigIssues issues;
  lowshot::check_run_config(c, issues);
  ASSERT_FALSE(issues.ok());
  EXPECT_NE(issues.joined().find("12 shots"), std::string::npos) << issues.joined();

  j["schedule"] = {{"shots_per_class", {11}}};
  c = parse_ok(j);
  issues = {};
  lowshot::check_run_config(c, issues);
  EXPECT_TRUE(issues.ok()) << issues.joined();

  c.discriminative.checkpoint = (root / "missing.bin").string();
  c.dataset.root = (root / "nope").string();
  issues = {};
  lowshot::check_run_config(c, issues);
  EXPECT_EQ(issues.errors.size(), 2u) << issues.joined();
}

TEST(Config, ReadsManifestConfig) {
  const fs::path dir = fs::path(::testing::TempDir()) / "lowshot_cfg_manifest";
  fs::create_directories(dir);
  const json cfg = minimal();
  lowshot::write_text_file((dir / "manifest.json").string(),
                           json{{"lowshot_manifest", 1}, {"config", cfg}}.dump());
  EXPECT_EQ(lowshot::read_config_json((dir / "manifest.json").string()), cfg);
  lowshot::write_text_file((dir / "bad.json").string(), "{ not json");
  EXPECT_THROW(lowshot::read_config_json((dir / "bad.json").string()), lowshot::ConfigError);
}

}  // namespace
