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

#include "fedicu/features.h"

#include <algorithm>
#include <cmath>
#include <set>

namespace fedicu::features {

namespace {

constexpr std::array<double, 3> kFractions = {0.10, 0.25, 0.50};

}  // namespace

const std::array<std::string, kNumWindows>& WindowNames() {
  static const std::array<std::string, kNumWindows> names = {
      "full", "first10", "first25", "first50", "last10", "last25", "last50"};
  return names;
}

const std::array<std::string, kNumStats>& StatNames() {
  static const std::array<std::string, kNumStats> names = {
      "max", "min", "mean", "std", "skew", "count"};
  return names;
}

std::array<std::vector<double>, kNumWindows> SliceWindows(
    std::span<const Measurement> series) {
  std::array<std::vector<double>, kNumWindows> windows;
  for (const Measurement& m : series) {
    windows[0].push_back(m.value);
    for (std::size_t q = 0; q < kFractions.size(); ++q) {
      if (m.hour < kHorizonHours * kFractions[q]) {
        windows[1 + q].push_back(m.value);
      }
      if (m.hour >= kHorizonHours * (1.0 - kFractions[q])) {
        windows[4 + q].push_back(m.value);
      }
    }
  }
  return windows;
}

std::array<double, kNumStats> WindowStats(std::span<const double> values) {
  std::array<double, kNumStats> out{};
  const std::size_t n = values.size();
  if (n == 0) return out;

  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double nd = static_cast<double>(n);
  const double mean = sum / nd;

  double m2 = 0.0, m3 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  const double std_dev = n < 2 ? 0.0 : std::sqrt(m2 / (nd - 1.0));
  m2 /= nd;
  m3 /= nd;
  const double skew = (n < 3 || m2 == 0.0) ? 0.0 : m3 / std::pow(m2, 1.5);

  out = {*hi, *lo, mean, std_dev, skew, nd};
  return out;
}

std::vector<std::string> FeatureNames(std::span<const std::string> variables) {
  std::vector<std::string> names;
  names.reserve(variables.size() * kFeaturesPerVariable);
  for (const std::string& var : variables) {
    for (const std::string& window : WindowNames()) {
      for (const std::string& stat : StatNames()) {
        names.push_back(var + "_" + window + "_" + stat);
      }
    }
  }
  return names;
}

FeatureMatrix Extract(std::span<const Episode> episodes,
                      std::span<const std::string> variables) {
  if (variables.empty()) {
    throw DimensionError("feature extraction needs at least one variable");
  }
  FeatureMatrix out;
  out.num_variables = variables.size();
  out.rows = Matrix(0, variables.size() * kFeaturesPerVariable);

  std::set<std::string> seen;
  std::vector<double> row(variables.size() * kFeaturesPerVariable);
  for (const Episode& ep : episodes) {
    if (!seen.insert(ep.episode_id).second) {
      throw DimensionError("duplicate episode id '" + ep.episode_id + "'");
    }
    auto cursor = row.begin();
    for (const std::string& var : variables) {
      const auto it = ep.series.find(var);
      const std::span<const Measurement> series =
          it == ep.series.end() ? std::span<const Measurement>()
                                : std::span<const Measurement>(it->second);
      for (const auto& window : SliceWindows(series)) {
        const auto stats = WindowStats(window);
        cursor = std::copy(stats.begin(), stats.end(), cursor);
      }
    }
    out.rows.AppendRow(row);
    out.episode_ids.push_back(ep.episode_id);
    out.labels.push_back(ep.label);
  }
  return out;
}

Scaler::Scaler(std::vector<double> mins, std::vector<double> maxs, bool clip)
    : mins_(std::move(mins)), maxs_(std::move(maxs)), clip_(clip) {
  if (mins_.size() != maxs_.size()) {
    throw DimensionError("scaler min/max lengths differ");
  }
  for (std::size_t i = 0; i < mins_.size(); ++i) {
    if (mins_[i] > maxs_[i]) {
      throw DimensionError("scaler feature " + std::to_string(i) +
                           " has min > max");
    }
  }
}

Scaler Scaler::Fit(const Matrix& train_rows, bool clip) {
  if (train_rows.rows() == 0) {
    throw DimensionError("scaler must be fit on at least one row");
  }
  std::vector<double> mins(train_rows.row(0).begin(), train_rows.row(0).end());
  std::vector<double> maxs = mins;
  for (std::size_t r = 1; r < train_rows.rows(); ++r) {
    const auto row = train_rows.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      mins[c] = std::min(mins[c], row[c]);
      maxs[c] = std::max(maxs[c], row[c]);
    }
  }
  return Scaler(std::move(mins), std::move(maxs), clip);
}

Matrix Scaler::Transform(const Matrix& rows) const {
  Matrix out = rows;
  TransformInPlace(out);
  return out;
}

void Scaler::TransformInPlace(Matrix& rows) const {
  if (rows.cols() != width() && rows.rows() > 0) {
    throw DimensionError("scaler fit on " + std::to_string(width()) +
                         " features, got rows of width " +
                         std::to_string(rows.cols()));
  }
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    auto row = rows.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      const double range = maxs_[c] - mins_[c];
      if (range == 0.0) {
        row[c] = 0.0;
        continue;
      }
      double scaled = 2.0 * (row[c] - mins_[c]) / range - 1.0;
      if (clip_) scaled = std::clamp(scaled, -1.0, 1.0);
      row[c] = scaled;
    }
  }
}

}  // namespace fedicu::features
