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

// Hand-engineered features over the first 48 hours of an ICU stay.
//
// Each variable's series is cut into seven windows on the fixed [0, 48] hour
// horizon and six statistics are taken per window, giving 42 features per
// variable. Column order is variable-major, then window, then statistic:
//
//   windows:    full, first10, first25, first50, last10, last25, last50
//   statistics: max, min, mean, std, skew, count
//
// first-q covers [0, 48q) and last-q covers [48(1-q), 48]. Empty windows
// produce six zeros.

#ifndef FEDICU_FEATURES_H_
#define FEDICU_FEATURES_H_

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fedicu/matrix.h"

namespace fedicu::features {

inline constexpr double kHorizonHours = 48.0;
inline constexpr std::size_t kNumWindows = 7;
inline constexpr std::size_t kNumStats = 6;
inline constexpr std::size_t kFeaturesPerVariable = kNumWindows * kNumStats;

struct Measurement {
  double hour = 0.0;
  double value = 0.0;

  friend bool operator==(const Measurement&, const Measurement&) = default;
};

using Series = std::vector<Measurement>;

// One admission. Hours are sorted within each variable.
struct Episode {
  std::string episode_id;
  std::map<std::string, Series> series;
  int label = 0;

  friend bool operator==(const Episode&, const Episode&) = default;
};

const std::array<std::string, kNumWindows>& WindowNames();
const std::array<std::string, kNumStats>& StatNames();

std::array<std::vector<double>, kNumWindows> SliceWindows(
    std::span<const Measurement> series);

// max, min, mean, sample std (n-1), Fisher-Pearson skew, count.
std::array<double, kNumStats> WindowStats(std::span<const double> values);

struct FeatureMatrix {
  Matrix rows;
  std::vector<std::string> episode_ids;
  std::vector<int> labels;
  std::size_t num_variables = 0;

  Samples ToSamples() const { return Samples{rows, labels}; }
};

// "<variable>_<window>_<stat>" for every column.
std::vector<std::string> FeatureNames(std::span<const std::string> variables);

// Throws DimensionError on an empty variable list or duplicate episode ids.
FeatureMatrix Extract(std::span<const Episode> episodes,
                      std::span<const std::string> variables);

// Min-max scaling into [-1, 1].
class Scaler {
 public:
  Scaler() = default;
  Scaler(std::vector<double> mins, std::vector<double> maxs, bool clip = true);

  static Scaler Fit(const Matrix& train_rows, bool clip = true);

  Matrix Transform(const Matrix& rows) const;
  void TransformInPlace(Matrix& rows) const;

  std::size_t width() const { return mins_.size(); }
  const std::vector<double>& mins() const { return mins_; }
  const std::vector<double>& maxs() const { return maxs_; }
  bool clip() const { return clip_; }

 private:
  std::vector<double> mins_;
  std::vector<double> maxs_;
  bool clip_ = true;
};

}  // namespace fedicu::features

#endif  // FEDICU_FEATURES_H_
