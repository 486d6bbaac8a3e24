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

#ifndef FEDICU_METRICS_H_
#define FEDICU_METRICS_H_

#include <cstddef>
#include <span>

namespace fedicu::metrics {

struct EvalResult {
  double auroc = 0.0;
  double auprc = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
};

// Mann-Whitney statistic: (concordant + 0.5 * tied) / (P * N) over all
// positive/negative pairs. Throws UndefinedMetricError unless both classes
// are present.
double Auroc(std::span<const double> scores, std::span<const int> labels);

// Average precision: sum over ranks of (R_n - R_{n-1}) * P_n, ranking by
// descending score with ties kept in input order. Throws
// UndefinedMetricError without positives.
double Auprc(std::span<const double> scores, std::span<const int> labels);

// Fraction of samples where (score >= threshold) matches the label.
double Accuracy(std::span<const double> scores, std::span<const int> labels,
                double threshold = 0.5);

EvalResult Evaluate(std::span<const double> scores,
                    std::span<const int> labels, double threshold = 0.5);

}  // namespace fedicu::metrics

#endif  // FEDICU_METRICS_H_
