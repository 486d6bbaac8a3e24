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

// Analytic gradient vs. central finite differences over random triples.

#ifndef FEDICU_TESTS_GRADIENT_CHECK_H_
#define FEDICU_TESTS_GRADIENT_CHECK_H_

#include <algorithm>
#include <cmath>

#include "fedicu/model.h"
#include "oracles.h"

namespace testing_support {

struct GradientCheckResult {
  int triples = 0;
  double max_rel_error = 0.0;
};

inline constexpr double kFiniteDifferenceStep = 1e-5;

// |a - n| / max(|a|, |n|, 1e-6). The floor keeps coordinates whose true
// gradient is ~0 from dividing FD truncation noise by nothing.
inline double RelativeError(double analytic, double numeric) {
  const double scale =
      std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

// ReLU has no derivative at 0; a triple whose hidden pre-activations sit
// within reach of the FD step is redrawn.
inline bool NearKink(const oracle::Net& net, const std::vector<double>& p,
                     const std::vector<double>& x_rows, std::size_t rows) {
  if (!net.mlp || net.tanh_act) return false;
  const std::size_t b1 = net.h * net.n;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < net.h; ++j) {
      long double a = p[b1 + j];
      for (std::size_t i = 0; i < net.n; ++i) {
        a += (long double)p[j * net.n + i] * x_rows[r * net.n + i];
      }
      if (std::abs(a) < 1e-3) return true;
    }
  }
  return false;
}

inline GradientCheckResult GradientCheck(bool mlp, int triples,
                                         std::uint64_t seed) {
  oracle::Gen gen(seed);
  GradientCheckResult out;
  while (out.triples < triples) {
    oracle::Net net;
    net.mlp = mlp;
    net.n = gen.Int(1, 6);
    net.h = mlp ? gen.Int(1, 6) : 0;
    net.tanh_act = mlp && gen.Coin();
    const auto arch =
        mlp ? fedicu::model::ModelArch::Mlp(
                  net.n, net.h,
                  net.tanh_act ? fedicu::model::Activation::kTanh
                               : fedicu::model::Activation::kRelu)
            : fedicu::model::ModelArch::Logistic(net.n);
    const std::size_t rows = gen.Int(1, 8);
    const auto p = gen.Reals(arch.ParameterCount(), -1.5, 1.5);
    const auto x_rows = gen.Reals(rows * net.n, -2, 2);
    std::vector<int> y(rows);
    for (int& v : y) v = gen.Coin() ? 1 : 0;
    if (NearKink(net, p, x_rows, rows)) continue;

    fedicu::Matrix x(rows, net.n);
    std::copy(x_rows.begin(), x_rows.end(), &x(0, 0));
    const auto analytic = fedicu::model::Gradient(
        arch, fedicu::model::ParameterVector(p), x, y);
    const auto numeric =
        oracle::FiniteDifference(net, p, x_rows, y, kFiniteDifferenceStep);
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      out.max_rel_error =
          std::max(out.max_rel_error, RelativeError(analytic[i], numeric[i]));
    }
    ++out.triples;
  }
  return out;
}

}  // namespace testing_support

#endif  // FEDICU_TESTS_GRADIENT_CHECK_H_
