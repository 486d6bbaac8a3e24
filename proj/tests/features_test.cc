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

#include <cmath>

#include "fedicu/errors.h"
#include "fedicu/features.h"
#include "oracles.h"

namespace fedicu::features {
namespace {

Series Points(std::initializer_list<std::pair<double, double>> pts) {
  Series s;
  for (auto [h, v] : pts) s.push_back(Measurement{h, v});
  return s;
}

std::vector<double> Stats(std::vector<double> v) {
  const auto a = WindowStats(v);
  return {a.begin(), a.end()};
}

TEST(SliceWindows, HalfOpenInteriorBoundary) {
  const auto w = SliceWindows(Points({{0, 1}, {24, 2}, {47, 3}}));
  // full, first10, first25, first50, last10, last25, last50
  EXPECT_EQ(w[0], (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(w[3], (std::vector<double>{1}));
  EXPECT_EQ(w[6], (std::vector<double>{2, 3}));
  EXPECT_EQ(w[4], (std::vector<double>{3}));  // [43.2, 48]
  EXPECT_EQ(w[5], (std::vector<double>{3}));  // [36, 48]
}

TEST(SliceWindows, EmptyAndHourZero) {
  for (const auto& w : SliceWindows({})) EXPECT_TRUE(w.empty());
  const auto w = SliceWindows(Points({{0, 5}}));
  for (int i : {0, 1, 2, 3}) EXPECT_EQ(w[i].size(), 1u);
  for (int i : {4, 5, 6}) EXPECT_TRUE(w[i].empty());
  const auto end = SliceWindows(Points({{48, 5}}));
  for (int i : {1, 2, 3}) EXPECT_TRUE(end[i].empty());
  for (int i : {0, 4, 5, 6}) EXPECT_EQ(end[i].size(), 1u);
}

TEST(WindowStats, Examples) {
  EXPECT_EQ(Stats({1, 2, 3}), (std::vector<double>{3, 1, 2, 1, 0, 3}));
  EXPECT_EQ(Stats({}), std::vector<double>(6, 0.0));
  EXPECT_EQ(Stats({4.5}), (std::vector<double>{4.5, 4.5, 4.5, 0, 0, 1}));
  EXPECT_EQ(Stats({2, 2, 2, 2})[4], 0.0);
}

TEST(WindowStats, SkewOfOneOneTwo) {
  // mean 4/3; m2 = 2/9, m3 = 2/27 -> g1 = 1/sqrt(2).
  const auto s = Stats({1, 1, 2});
  EXPECT_NEAR(s[4], 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(s[4], 0.707107, 1e-6);
  EXPECT_NEAR(s[3], std::sqrt(1.0 / 3.0), 1e-12);
}

TEST(WindowStats, MatchesOracleProperty) {
  oracle::Gen gen(4);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t n = gen.Int(0, 40);
    const auto v = gen.Reals(n, -100, 300);
    const auto got = Stats(v);
    const auto want = oracle::WindowStats(v);
    for (int i = 0; i < 6; ++i) {
      EXPECT_NEAR(got[i], want[i], 1e-9 * std::max(1.0, std::abs(want[i])))
          << "stat " << i << " n=" << n;
    }
  }
}

TEST(Extract, WidthAndLayout) {
  const std::vector<std::string> vars = {"a", "b", "c", "d", "e", "f", "g"};
  Episode e{"ep1", {{"a", Points({{1, 2}})}}, 1};
  const FeatureMatrix fm = Extract(std::vector<Episode>{e}, vars);
  EXPECT_EQ(fm.rows.cols(), 294u);
  EXPECT_EQ(FeatureNames(vars).size(), 294u);
  EXPECT_EQ(FeatureNames(vars)[0], "a_full_max");
  EXPECT_EQ(FeatureNames(vars)[43], "b_full_min");
  EXPECT_EQ(fm.labels, std::vector<int>{1});
  EXPECT_EQ(fm.episode_ids, std::vector<std::string>{"ep1"});
}

TEST(Extract, SinglePointAtHourZero) {
  const std::vector<std::string> vars = {"hr"};
  Episode e{"x", {{"hr", Points({{0, 5}})}}, 0};
  const FeatureMatrix fm = Extract(std::vector<Episode>{e}, vars);
  const auto row = fm.rows.row(0);
  const std::vector<double> full(row.begin(), row.begin() + 6);
  EXPECT_EQ(full, (std::vector<double>{5, 5, 5, 0, 0, 1}));
  for (std::size_t i = 4 * 6; i < 42; ++i) EXPECT_EQ(row[i], 0.0);
}

TEST(Extract, NoMeasurementsGivesZeroRow) {
  const std::vector<std::string> vars = {"hr", "bp"};
  Episode e{"x", {}, 0};
  const auto fm = Extract(std::vector<Episode>{e}, vars);
  for (double v : fm.rows.row(0)) EXPECT_EQ(v, 0.0);
}

TEST(Extract, WidthIs42VProperty) {
  oracle::Gen gen(8);
  for (int t = 0; t < 100; ++t) {
    const std::size_t v = gen.Int(1, 12);
    std::vector<std::string> vars;
    for (std::size_t i = 0; i < v; ++i) vars.push_back("v" + std::to_string(i));
    std::vector<Episode> eps(gen.Int(1, 5));
    for (std::size_t i = 0; i < eps.size(); ++i) {
      eps[i].episode_id = "e" + std::to_string(i);
      for (const auto& name : vars) {
        if (gen.Coin(0.3)) continue;
        Series s;
        for (int k = gen.Int(0, 10); k > 0; --k) {
          s.push_back({gen.Real(0, 48), gen.Real(-5, 5)});
        }
        eps[i].series[name] = s;
      }
    }
    EXPECT_EQ(Extract(eps, vars).rows.cols(), 42 * v);
  }
}

TEST(Extract, DuplicateEpisodeIdThrows) {
  std::vector<Episode> eps = {{"a", {}, 0}, {"a", {}, 1}};
  EXPECT_THROW(Extract(eps, std::vector<std::string>{"hr"}), DimensionError);
}

TEST(Scaler, Examples) {
  Matrix train;
  train.AppendRow(std::vector<double>{2, 7});
  train.AppendRow(std::vector<double>{6, 7});
  const Scaler s = Scaler::Fit(train);
  Matrix test;
  test.AppendRow(std::vector<double>{4, 100});
  test.AppendRow(std::vector<double>{8, -3});
  test.AppendRow(std::vector<double>{-10, 7});
  const Matrix out = s.Transform(test);
  EXPECT_EQ(out(0, 0), 0.0);
  EXPECT_EQ(out(0, 1), 0.0);
  EXPECT_EQ(out(1, 0), 1.0);
  EXPECT_EQ(out(1, 1), 0.0);
  EXPECT_EQ(out(2, 0), -1.0);
  const Scaler unclipped(s.mins(), s.maxs(), /*clip=*/false);
  EXPECT_EQ(unclipped.Transform(test)(1, 0), 2.0);
}

TEST(Scaler, WidthMismatchThrows) {
  Matrix train(1, 3);
  const Scaler s = Scaler::Fit(train);
  EXPECT_THROW(s.Transform(Matrix(1, 2)), DimensionError);
}

TEST(Scaler, TrainingRowsLandInClosedUnitBoxProperty) {
  oracle::Gen gen(10);
  for (int t = 0; t < 300; ++t) {
    const std::size_t rows = gen.Int(1, 30), cols = gen.Int(1, 10);
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        m(r, c) = gen.Coin(0.1) ? 3.0 : gen.Real(-1e6, 1e6) * gen.Real(0, 1);
      }
    }
    const Matrix out = Scaler::Fit(m).Transform(m);
    for (double v : out.data()) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

}  // namespace
}  // namespace fedicu::features
