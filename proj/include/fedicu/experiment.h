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

// End-to-end experiments: data -> features -> centralized or federated
// training -> JSON report. The configuration is a flat JSON object; every
// command-line flag of the `fedicu` tool maps to one key.

#ifndef FEDICU_EXPERIMENT_H_
#define FEDICU_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedicu/data.h"
#include "fedicu/features.h"
#include "fedicu/federation.h"
#include "fedicu/metrics.h"
#include "fedicu/model.h"
#include "json.hpp"

namespace fedicu::experiment {

inline constexpr int kReportSchemaVersion = 1;

enum class Mode { kCentral, kFederated };
std::string_view ToString(Mode mode);
Mode ParseMode(std::string_view name);

enum class KeyType { kInt, kDouble, kString, kBool, kStringList };

struct ConfigKey {
  std::string_view name;
  KeyType type;
  std::string_view help;
  bool synthetic_source = false;  // describes the synthetic generator
};

// Every accepted configuration key, in a stable order.
std::span<const ConfigKey> ConfigKeys();

// Sub-seeds, all derived from the master seed.
struct Seeds {
  std::uint64_t master = 0;
  std::uint64_t data = 0;
  std::uint64_t split = 0;
  std::uint64_t partition = 0;
  std::uint64_t init = 0;
  std::uint64_t train = 0;
  std::uint64_t cohort = 0;

  static Seeds From(std::uint64_t master);
};

struct ExperimentConfig {
  // Data source: a directory with measurements.csv and labels.csv, or the
  // synthetic generator.
  std::optional<std::string> data_dir;
  data::SyntheticConfig synthetic;
  // Empty means every variable present in the data, sorted.
  std::vector<std::string> variables;
  double test_fraction = 0.2;

  model::ModelKind model = model::ModelKind::kLogistic;
  std::size_t hidden = 50;
  model::Activation activation = model::Activation::kRelu;
  model::TrainConfig train;  // seed is overwritten from Seeds

  Mode mode = Mode::kCentral;
  federation::FedConfig fed;  // seed is overwritten from Seeds
  data::PartitionStrategy partition = data::PartitionStrategy::kEqualIid;
  double skew_alpha = 0.5;
  federation::SimulatedTransport transport =
      federation::SimulatedTransport::kInProcess;

  std::uint64_t seed = 42;
  std::string out_dir = ".";

  // serve / worker
  std::string listen = "127.0.0.1:7070";
  std::string connect = "127.0.0.1:7070";
  std::string shard;
  std::uint32_t hospital_id = 1;
  std::size_t accept_timeout_s = 120;

  // Throws UsageError on unknown keys, wrong types, bad enum values, or
  // when both a data directory and synthetic-generator keys are given.
  static ExperimentConfig FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;

  Seeds seeds() const { return Seeds::From(seed); }
  model::ModelArch Arch(std::size_t input_dim) const;
  // Train config with the derived seed; epochs as configured.
  model::TrainConfig TrainWithSeed() const;
  federation::FedConfig FedWithSeed() const;
};

nlohmann::json LoadConfigFile(const std::filesystem::path& path);

// Episodes split and turned into raw (unscaled) features.
struct PreparedData {
  std::vector<std::string> variables;
  features::FeatureMatrix train;
  features::FeatureMatrix test;
};

PreparedData PrepareData(const ExperimentConfig& cfg);

// Splits prepared rows across hospitals and scales each shard with a scaler
// fit on that hospital's own training rows.
std::vector<HospitalDataset> BuildHospitals(const ExperimentConfig& cfg,
                                            const PreparedData& prepared);

struct Report {
  metrics::EvalResult metrics;
  model::ParameterVector final_params;
  nlohmann::json json;
};

// "LR-ORG", "MLP-FL", ...
std::string CellLabel(model::ModelKind model, Mode mode);

Report RunExperiment(const ExperimentConfig& cfg);
Report RunPrepared(const ExperimentConfig& cfg, const PreparedData& prepared);

struct Comparison {
  // LR-ORG, LR-FL, MLP-ORG, MLP-FL.
  std::vector<std::string> labels;
  std::vector<metrics::EvalResult> results;
  nlohmann::json json;
};

Comparison RunComparison(const ExperimentConfig& cfg);
std::string RenderTable(const Comparison& comparison);

// Hex FNV-1a over the little-endian bytes of the parameters.
std::string ParamsDigest(const model::ParameterVector& params);

nlohmann::json HistoryToJson(const std::vector<federation::RoundRecord>& history);

// Writes `j` with a trailing newline; creates parent directories.
void WriteJson(const nlohmann::json& j, const std::filesystem::path& path);

std::string UtcTimestamp();

}  // namespace fedicu::experiment

#endif  // FEDICU_EXPERIMENT_H_
