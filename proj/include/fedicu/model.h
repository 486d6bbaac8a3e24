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

// Logistic regression and a one-hidden-layer perceptron for binary
// classification, trained with mini-batch Adam on mean cross-entropy.
//
// Parameter layout (flat, row-major):
//   LR:  w[input_dim], b
//   MLP: W1[hidden_dim][input_dim], b1[hidden_dim], w2[hidden_dim], b2
//
// Every function here is pure; separate hospitals may train concurrently.

#ifndef FEDICU_MODEL_H_
#define FEDICU_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedicu/matrix.h"

namespace fedicu::model {

enum class ModelKind { kLogistic, kMlp };
enum class Activation { kRelu, kTanh };

std::string_view ToString(ModelKind kind);
std::string_view ToString(Activation activation);
// Throw UsageError listing the accepted names.
ModelKind ParseModelKind(std::string_view name);
Activation ParseActivation(std::string_view name);

struct ModelArch {
  ModelKind kind = ModelKind::kLogistic;
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 50;  // MLP only.
  Activation activation = Activation::kRelu;  // MLP only.

  static ModelArch Logistic(std::size_t input_dim);
  static ModelArch Mlp(std::size_t input_dim, std::size_t hidden_dim = 50,
                       Activation activation = Activation::kRelu);

  std::size_t ParameterCount() const;
  // Throws DimensionError on a zero input or hidden width.
  void Validate() const;

  friend bool operator==(const ModelArch&, const ModelArch&) = default;
};

// Flat model parameters (the global or a local model).
struct ParameterVector {
  std::vector<double> values;

  ParameterVector() = default;
  explicit ParameterVector(std::vector<double> v) : values(std::move(v)) {}
  explicit ParameterVector(std::size_t n) : values(n, 0.0) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::span<const double> span() const { return values; }
  bool AllFinite() const;

  friend bool operator==(const ParameterVector&,
                         const ParameterVector&) = default;
};

// Throws DimensionError unless params has arch.ParameterCount() entries.
void CheckParams(const ModelArch& arch, const ParameterVector& params);

// Glorot-uniform weights per layer, zero biases.
ParameterVector InitParams(const ModelArch& arch, std::uint64_t seed);

// Predicted probability of the positive class, in (0, 1).
double Forward(const ModelArch& arch, const ParameterVector& params,
               std::span<const double> x);

std::vector<double> Predict(const ModelArch& arch,
                            const ParameterVector& params, const Matrix& x);

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp].
inline constexpr double kProbClamp = 1e-12;

double CrossEntropy(std::span<const double> probs, std::span<const int> labels);

// Gradient of mean cross-entropy over the whole batch.
ParameterVector Gradient(const ModelArch& arch, const ParameterVector& params,
                         const Matrix& x, std::span<const int> y);

// Same, over the rows listed in `rows`.
ParameterVector Gradient(const ModelArch& arch, const ParameterVector& params,
                         const Matrix& x, std::span<const int> y,
                         std::span<const std::size_t> rows);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step_count = 0;
  AdamConfig config;

  static AdamState Fresh(std::size_t num_params, const AdamConfig& config);
};

// One bias-corrected Adam update, in place.
void AdamStep(ParameterVector& params, std::span<const double> grads,
              AdamState& state);

struct TrainConfig {
  std::size_t batch_size = 8;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  bool shuffle = true;
  AdamConfig adam;
};

// Runs cfg.epochs passes of mini-batch Adam from `params` with a fresh
// optimizer state. The last batch of an epoch may be partial.
ParameterVector Train(const ModelArch& arch, ParameterVector params,
                      const Samples& data, const TrainConfig& cfg);

}  // namespace fedicu::model

#endif  // FEDICU_MODEL_H_
