/*
 * Copyright 2026 The fedicu Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include <unistd.h>

#include "fedicu/errors.h"
#include "fedicu/experiment.h"

namespace fedicu::experiment {
namespace {

using nlohmann::json;

json Small() {
  return {{"episodes", 300}, {"epochs", 15}, {"rounds", 15}, {"seed", 3}};
}

TEST(Config, DefaultsAndOverrides) {
  const auto cfg = ExperimentConfig::FromJson(
      {{"model", "mlp"}, {"hidden", 8}, {"mode", "federated"}, {"gate", false},
       {"variables", {"heart_rate", "glucose"}}, {"learning_rate", 0.01}});
  EXPECT_EQ(cfg.model, model::ModelKind::kMlp);
  EXPECT_EQ(cfg.hidden, 8u);
  EXPECT_EQ(cfg.mode, Mode::kFederated);
  EXPECT_FALSE(cfg.fed.gate_enabled);
  EXPECT_EQ(cfg.variables.size(), 2u);
  EXPECT_EQ(cfg.train.adam.learning_rate, 0.01);
  EXPECT_EQ(cfg.train.batch_size, 8u);
  EXPECT_EQ(cfg.train.epochs, 100u);
  EXPECT_EQ(cfg.fed.num_hospitals, 2u);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(ExperimentConfig::FromJson({{"nope", 1}}), UsageError);
  EXPECT_THROW(ExperimentConfig::FromJson({{"epochs", "ten"}}), UsageError);
  EXPECT_THROW(ExperimentConfig::FromJson({{"epochs", -1}}), UsageError);
  EXPECT_THROW(ExperimentConfig::FromJson({{"mode", "hybrid"}}), UsageError);
  EXPECT_THROW(ExperimentConfig::FromJson({{"transport", "udp"}}), UsageError);
  EXPECT_THROW(ExperimentConfig::FromJson({{"rounds", 0}}), UsageError);
  EXPECT_THROW(ExperimentConfig::FromJson({{"test_fraction", 1.0}}), UsageError);
  EXPECT_THROW(ExperimentConfig::FromJson(json::array()), UsageError);
  EXPECT_THROW(
      ExperimentConfig::FromJson({{"data_dir", "d"}, {"episodes", 10}}),
      UsageError);
  try {
    ExperimentConfig::FromJson({{"model", "xgb"}});
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("lr, mlp"), std::string::npos);
  }
}

TEST(Config, EveryKeyIsUniqueAndRoundTrips) {
  std::set<std::string_view> names;
  for (const auto& k : ConfigKeys()) EXPECT_TRUE(names.insert(k.name).second);
  const auto cfg = ExperimentConfig::FromJson(
      {{"model", "mlp"}, {"partition", "label_skew"}, {"gate_metric", "auroc"},
       {"transport", "tcp"}, {"seed", 77}});
  const json echoed = cfg.ToJson();
  for (const auto& [key, value] : echoed.items()) {
    EXPECT_TRUE(names.count(key)) << key;
  }
  EXPECT_EQ(ExperimentConfig::FromJson(echoed).ToJson(), echoed);
}

TEST(Seeds, DerivedAndDistinct) {
  const Seeds s = Seeds::From(42);
  EXPECT_EQ(s.master, 42u);
  const std::set<std::uint64_t> all = {s.data, s.split, s.partition,
                                       s.init,  s.train, s.cohort};
  EXPECT_EQ(all.size(), 6u);
  EXPECT_EQ(Seeds::From(42).train, s.train);
}

TEST(Run, CentralLogisticSeparatesSyntheticData) {
  json j = Small();
  j["episodes"] = 1000;
  j["effect_size"] = 2.0;
  const Report r = RunExperiment(ExperimentConfig::FromJson(j));
  EXPECT_GT(r.metrics.auroc, 0.95);
  EXPECT_EQ(r.json["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(r.json["cell"], "LR-ORG");
  EXPECT_EQ(r.json["config"]["episodes"], 1000);
  EXPECT_TRUE(r.json["seeds"].contains("partition"));
  EXPECT_EQ(r.json["dataset"]["n_features"], 294);
}

TEST(Run, ReportsAreDeterministicModuloTimestamp) {
  json j = Small();
  j["mode"] = "federated";
  j["model"] = "mlp";
  j["hidden"] = 6;
  const auto cfg = ExperimentConfig::FromJson(j);
  json a = RunExperiment(cfg).json;
  json b = RunExperiment(cfg).json;
  a.erase("generated_at");
  b.erase("generated_at");
  EXPECT_EQ(a, b);
  ASSERT_EQ(a["history"].size(), 15u);
  EXPECT_TRUE(a["history"][0]["test"].contains("auroc"));
  EXPECT_EQ(a["cell"], "MLP-FL");
}

TEST(Run, DataDirectoryMatchesSyntheticSource) {
  const json j = Small();
  const auto synthetic_cfg = ExperimentConfig::FromJson(j);
  const auto synthetic = RunExperiment(synthetic_cfg);

  data::SyntheticConfig gen = synthetic_cfg.synthetic;
  gen.seed = synthetic_cfg.seeds().data;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("fedicu_exp_test_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  data::SaveEpisodes(data::Generate(gen), dir / "measurements.csv",
                     dir / "labels.csv");
  json from_disk = {{"data_dir", dir.string()}, {"epochs", 15}, {"seed", 3}};
  const auto loaded = RunExperiment(ExperimentConfig::FromJson(from_disk));
  std::filesystem::remove_all(dir);
  EXPECT_EQ(loaded.final_params, synthetic.final_params);
}

TEST(Compare, FourCellsAndTable) {
  json j = Small();
  j["hidden"] = 4;
  const Comparison c = RunComparison(ExperimentConfig::FromJson(j));
  EXPECT_EQ(c.labels,
            (std::vector<std::string>{"LR-ORG", "LR-FL", "MLP-ORG", "MLP-FL"}));
  ASSERT_EQ(c.results.size(), 4u);
  const std::string table = RenderTable(c);
  for (const auto& label : c.labels) {
    EXPECT_NE(table.find(label), std::string::npos);
  }
  EXPECT_NE(table.find("AUROC"), std::string::npos);
  EXPECT_NE(table.find("AUPRC"), std::string::npos);
  EXPECT_EQ(c.json["cells"].size(), 4u);
  EXPECT_TRUE(c.json["cells"]["MLP-FL"]["metrics"].contains("auprc"));
}

TEST(Digest, StableAndSensitive) {
  const model::ParameterVector a(std::vector<double>{1.0, 2.0});
  EXPECT_EQ(ParamsDigest(a), ParamsDigest(a));
  EXPECT_EQ(ParamsDigest(a).size(), 16u);
  EXPECT_NE(ParamsDigest(a),
            ParamsDigest(model::ParameterVector(std::vector<double>{1.0, -2.0})));
}

}  // namespace
}  // namespace fedicu::experiment
