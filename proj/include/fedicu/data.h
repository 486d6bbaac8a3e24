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

// Synthetic ICU episodes, CSV storage, stratified splitting and partitioning
// of rows across simulated hospitals.

#ifndef FEDICU_DATA_H_
#define FEDICU_DATA_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedicu/features.h"
#include "fedicu/matrix.h"

namespace fedicu::data {

using features::Episode;

struct SyntheticConfig {
  std::size_t n_episodes = 2000;
  std::size_t n_variables = 7;
  double prevalence = 0.15;
  // Mean shift of positive episodes, in units of the variable's noise std.
  double effect_size = 1.0;
  std::size_t min_points = 6;
  std::size_t max_points = 30;
  std::uint64_t seed = 0;
};

// Names used for the first seven variables; further ones are "var<k>".
std::vector<std::string> VariableNames(std::size_t n_variables);

// Exactly round(prevalence * n) positives, chosen by a seeded shuffle.
// Each episode draws a patient-level offset and per-measurement noise around
// the variable baseline; positives are shifted by effect_size noise stds.
// Throws UsageError when the positive count rounds to 0 or n.
std::vector<Episode> Generate(const SyntheticConfig& cfg);

// Distinct variable names over all episodes, sorted.
std::vector<std::string> CollectVariables(std::span<const Episode> episodes);

// measurements.csv: episode_id,variable,hour,value
// labels.csv:       episode_id,label
void SaveEpisodes(std::span<const Episode> episodes,
                  const std::filesystem::path& measurements_path,
                  const std::filesystem::path& labels_path);

// Episodes come back in labels-file order, series sorted by hour. Throws
// DataError carrying the offending line number.
std::vector<Episode> LoadEpisodes(
    const std::filesystem::path& measurements_path,
    const std::filesystem::path& labels_path);

// episode_id,label,<feature names...>
void SaveFeatureCsv(const features::FeatureMatrix& fm,
                    std::span<const std::string> feature_names,
                    const std::filesystem::path& path);
features::FeatureMatrix LoadFeatureCsv(const std::filesystem::path& path);

// Shortest decimal form that parses back to the same double.
std::string FormatDouble(double v);
double ParseDouble(std::string_view text);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Stratified by label. Each class contributes
// clamp(round(test_fraction * n_class), 1, n_class - 1) rows to the test
// side, so both classes need at least two members. Indices come back sorted.
SplitIndices SplitTrainTest(std::span<const int> labels, double test_fraction,
                            std::uint64_t seed);

struct EpisodeSplit {
  std::vector<Episode> train;
  std::vector<Episode> test;
};
EpisodeSplit SplitTrainTest(std::span<const Episode> episodes,
                            double test_fraction, std::uint64_t seed);

enum class PartitionStrategy { kEqualIid, kLabelSkew };

std::string_view ToString(PartitionStrategy strategy);
PartitionStrategy ParsePartitionStrategy(std::string_view name);

struct PartitionPlan {
  PartitionStrategy strategy = PartitionStrategy::kEqualIid;
  std::size_t num_hospitals = 2;
  double skew_alpha = 0.5;  // kLabelSkew only.
  std::uint64_t seed = 0;
};

// Row indices per hospital. Shards are disjoint, cover every row, and are
// each non-empty. kEqualIid: seeded shuffle then contiguous chunks whose
// sizes differ by at most one. kLabelSkew: per-class hospital proportions
// drawn from a symmetric Dirichlet(skew_alpha).
std::vector<std::vector<std::size_t>> PartitionRows(
    std::span<const int> labels, const PartitionPlan& plan);

// Splits train and test independently. Hospital ids are 1..K. For
// kLabelSkew the same per-class proportions apply to both sides.
std::vector<HospitalDataset> Partition(const Samples& train,
                                       const Samples& test,
                                       const PartitionPlan& plan);

}  // namespace fedicu::data

#endif  // FEDICU_DATA_H_
