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

#include "fedicu/metrics.h"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "fedicu/errors.h"

namespace fedicu::metrics {

namespace {

void CheckLengths(std::span<const double> scores, std::span<const int> labels,
                  const char* metric) {
  if (scores.size() != labels.size()) {
    throw DimensionError(std::string(metric) + ": " +
                         std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (scores.empty()) {
    throw DimensionError(std::string(metric) + " of an empty set");
  }
}

}  // namespace

double Auroc(std::span<const double> scores, std::span<const int> labels) {
  CheckLengths(scores, labels, "auroc");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Walk groups of tied scores in ascending order. Each positive earns one
  // point per negative strictly below it and half a point per tied negative.
  // Everything is kept in half-points so the sum is an exact integer.
  std::uint64_t half_points = 0;
  std::uint64_t negatives_below = 0;
  std::uint64_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos : neg) += 1;
      ++j;
    }
    half_points += pos * (2 * negatives_below + neg);
    negatives_below += neg;
    positives += pos;
    i = j;
  }
  if (positives == 0 || negatives_below == 0) {
    throw UndefinedMetricError(
        "auroc is undefined unless both classes are present");
  }
  return static_cast<double>(half_points) / 2.0 /
         (static_cast<double>(positives) *
          static_cast<double>(negatives_below));
}

double Auprc(std::span<const double> scores, std::span<const int> labels) {
  CheckLengths(scores, labels, "auprc");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  // Recall only moves at positives, by 1/P each time.
  double precision_sum = 0.0;
  std::size_t true_positives = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] != 1) continue;
    ++true_positives;
    precision_sum +=
        static_cast<double>(true_positives) / static_cast<double>(rank + 1);
  }
  if (true_positives == 0) {
    throw UndefinedMetricError("auprc is undefined without positive labels");
  }
  return precision_sum / static_cast<double>(true_positives);
}

double Accuracy(std::span<const double> scores, std::span<const int> labels,
                double threshold) {
  CheckLengths(scores, labels, "accuracy");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int predicted = scores[i] >= threshold ? 1 : 0;
    if (predicted == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

EvalResult Evaluate(std::span<const double> scores,
                    std::span<const int> labels, double threshold) {
  return EvalResult{Auroc(scores, labels), Auprc(scores, labels),
                    Accuracy(scores, labels, threshold), scores.size()};
}

}  // namespace fedicu::metrics
