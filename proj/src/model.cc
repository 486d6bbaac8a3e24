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

#include "fedicu/model.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedicu/random.h"

namespace fedicu::model {

namespace {

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double Activate(Activation a, double z) {
  switch (a) {
    case Activation::kRelu:
      return z > 0 ? z : 0.0;
    case Activation::kTanh:
      return std::tanh(z);
  }
  return z;
}

// Derivative expressed through the pre-activation and the activation value.
double ActivateDerivative(Activation a, double z, double h) {
  switch (a) {
    case Activation::kRelu:
      return z > 0 ? 1.0 : 0.0;
    case Activation::kTanh:
      return 1.0 - h * h;
  }
  return 1.0;
}

void CheckInput(const ModelArch& arch, std::size_t width) {
  if (width != arch.input_dim) {
    throw DimensionError("feature vector has length " + std::to_string(width) +
                         ", model expects " + std::to_string(arch.input_dim));
  }
}

// Offsets into the MLP parameter vector.
struct MlpLayout {
  std::size_t w1, b1, w2, b2;
  explicit MlpLayout(const ModelArch& arch)
      : w1(0),
        b1(arch.hidden_dim * arch.input_dim),
        w2(b1 + arch.hidden_dim),
        b2(w2 + arch.hidden_dim) {}
};

// Accumulates the per-sample gradient of cross-entropy into `grad`.
// `hidden`/`pre` are caller-provided scratch of length hidden_dim.
void AccumulateSample(const ModelArch& arch, const std::vector<double>& p,
                      std::span<const double> x, int y,
                      std::vector<double>& grad, std::vector<double>& pre,
                      std::vector<double>& hidden) {
  const std::size_t n = arch.input_dim;
  if (arch.kind == ModelKind::kLogistic) {
    double z = p[n];
    for (std::size_t i = 0; i < n; ++i) z += p[i] * x[i];
    const double delta = Sigmoid(z) - y;
    for (std::size_t i = 0; i < n; ++i) grad[i] += delta * x[i];
    grad[n] += delta;
    return;
  }

  const MlpLayout at(arch);
  const std::size_t h = arch.hidden_dim;
  double z2 = p[at.b2];
  for (std::size_t j = 0; j < h; ++j) {
    const double* wrow = p.data() + at.w1 + j * n;
    double z = p[at.b1 + j];
    for (std::size_t i = 0; i < n; ++i) z += wrow[i] * x[i];
    pre[j] = z;
    hidden[j] = Activate(arch.activation, z);
    z2 += p[at.w2 + j] * hidden[j];
  }
  const double delta2 = Sigmoid(z2) - y;
  grad[at.b2] += delta2;
  for (std::size_t j = 0; j < h; ++j) {
    grad[at.w2 + j] += delta2 * hidden[j];
    const double delta1 = delta2 * p[at.w2 + j] *
                          ActivateDerivative(arch.activation, pre[j], hidden[j]);
    if (delta1 == 0.0) continue;
    grad[at.b1 + j] += delta1;
    double* grow = grad.data() + at.w1 + j * n;
    for (std::size_t i = 0; i < n; ++i) grow[i] += delta1 * x[i];
  }
}

}  // namespace

std::string_view ToString(ModelKind kind) {
  return kind == ModelKind::kLogistic ? "lr" : "mlp";
}

std::string_view ToString(Activation activation) {
  return activation == Activation::kRelu ? "relu" : "tanh";
}

ModelKind ParseModelKind(std::string_view name) {
  if (name == "lr") return ModelKind::kLogistic;
  if (name == "mlp") return ModelKind::kMlp;
  throw UsageError("unknown model '" + std::string(name) +
                   "'; valid values: lr, mlp");
}

Activation ParseActivation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw UsageError("unknown activation '" + std::string(name) +
                   "'; valid values: relu, tanh");
}

ModelArch ModelArch::Logistic(std::size_t input_dim) {
  ModelArch arch{ModelKind::kLogistic, input_dim, 0, Activation::kRelu};
  arch.Validate();
  return arch;
}

ModelArch ModelArch::Mlp(std::size_t input_dim, std::size_t hidden_dim,
                         Activation activation) {
  ModelArch arch{ModelKind::kMlp, input_dim, hidden_dim, activation};
  arch.Validate();
  return arch;
}

std::size_t ModelArch::ParameterCount() const {
  if (kind == ModelKind::kLogistic) return input_dim + 1;
  return input_dim * hidden_dim + hidden_dim + hidden_dim + 1;
}

void ModelArch::Validate() const {
  if (input_dim == 0) throw DimensionError("input_dim must be at least 1");
  if (kind == ModelKind::kMlp && hidden_dim == 0) {
    throw DimensionError("hidden_dim must be at least 1 for an MLP");
  }
}

bool ParameterVector::AllFinite() const {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

void CheckParams(const ModelArch& arch, const ParameterVector& params) {
  if (params.size() != arch.ParameterCount()) {
    throw DimensionError("parameter vector has length " +
                         std::to_string(params.size()) + ", model expects " +
                         std::to_string(arch.ParameterCount()));
  }
}

ParameterVector InitParams(const ModelArch& arch, std::uint64_t seed) {
  arch.Validate();
  RandomEngine rng(seed);
  ParameterVector params(arch.ParameterCount());
  auto fill = [&](std::size_t begin, std::size_t count, std::size_t fan_in,
                  std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < count; ++i) {
      params[begin + i] = UniformReal(rng, -limit, limit);
    }
  };
  if (arch.kind == ModelKind::kLogistic) {
    fill(0, arch.input_dim, arch.input_dim, 1);
  } else {
    const MlpLayout at(arch);
    fill(at.w1, arch.hidden_dim * arch.input_dim, arch.input_dim,
         arch.hidden_dim);
    fill(at.w2, arch.hidden_dim, arch.hidden_dim, 1);
  }
  return params;
}

double Forward(const ModelArch& arch, const ParameterVector& params,
               std::span<const double> x) {
  CheckParams(arch, params);
  CheckInput(arch, x.size());
  const std::size_t n = arch.input_dim;
  const auto& p = params.values;
  if (arch.kind == ModelKind::kLogistic) {
    double z = p[n];
    for (std::size_t i = 0; i < n; ++i) z += p[i] * x[i];
    return Sigmoid(z);
  }
  const MlpLayout at(arch);
  double z2 = p[at.b2];
  for (std::size_t j = 0; j < arch.hidden_dim; ++j) {
    const double* wrow = p.data() + at.w1 + j * n;
    double z = p[at.b1 + j];
    for (std::size_t i = 0; i < n; ++i) z += wrow[i] * x[i];
    z2 += p[at.w2 + j] * Activate(arch.activation, z);
  }
  return Sigmoid(z2);
}

std::vector<double> Predict(const ModelArch& arch,
                            const ParameterVector& params, const Matrix& x) {
  std::vector<double> out;
  out.reserve(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    out.push_back(Forward(arch, params, x.row(r)));
  }
  return out;
}

double CrossEntropy(std::span<const double> probs,
                    std::span<const int> labels) {
  if (probs.empty()) throw DimensionError("cross-entropy of an empty batch");
  if (probs.size() != labels.size()) {
    throw DimensionError("cross-entropy: " + std::to_string(probs.size()) +
                         " probabilities vs " + std::to_string(labels.size()) +
                         " labels");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbClamp, 1.0 - kProbClamp);
    total -= labels[i] == 1 ? std::log(p) : std::log1p(-p);
  }
  return total / static_cast<double>(probs.size());
}

ParameterVector Gradient(const ModelArch& arch, const ParameterVector& params,
                         const Matrix& x, std::span<const int> y) {
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return Gradient(arch, params, x, y, rows);
}

ParameterVector Gradient(const ModelArch& arch, const ParameterVector& params,
                         const Matrix& x, std::span<const int> y,
                         std::span<const std::size_t> rows) {
  CheckParams(arch, params);
  if (rows.empty()) throw DimensionError("gradient of an empty batch");
  if (x.rows() != y.size()) {
    throw DimensionError("gradient: " + std::to_string(x.rows()) +
                         " rows vs " + std::to_string(y.size()) + " labels");
  }
  CheckInput(arch, x.cols());

  std::vector<double> grad(params.size(), 0.0);
  std::vector<double> pre(arch.hidden_dim), hidden(arch.hidden_dim);
  for (std::size_t r : rows) {
    AccumulateSample(arch, params.values, x.row(r), y[r], grad, pre, hidden);
  }
  const double scale = 1.0 / static_cast<double>(rows.size());
  for (double& g : grad) g *= scale;
  return ParameterVector(std::move(grad));
}

AdamState AdamState::Fresh(std::size_t num_params, const AdamConfig& config) {
  return AdamState{std::vector<double>(num_params, 0.0),
                   std::vector<double>(num_params, 0.0), 0, config};
}

void AdamStep(ParameterVector& params, std::span<const double> grads,
              AdamState& state) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw DimensionError("adam: parameter, gradient and moment lengths differ");
  }
  const AdamConfig& c = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

ParameterVector Train(const ModelArch& arch, ParameterVector params,
                      const Samples& data, const TrainConfig& cfg) {
  CheckParams(arch, params);
  if (data.empty()) throw DimensionError("cannot train on an empty dataset");
  if (cfg.batch_size == 0) throw DimensionError("batch_size must be positive");
  if (cfg.epochs == 0) return params;

  RandomEngine rng(cfg.seed);
  AdamState state = AdamState::Fresh(params.size(), cfg.adam);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::span<const std::size_t> all(order);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) Shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const ParameterVector grad =
          Gradient(arch, params, data.x, data.y, all.subspan(start, len));
      AdamStep(params, grad.span(), state);
    }
  }
  return params;
}

}  // namespace fedicu::model
