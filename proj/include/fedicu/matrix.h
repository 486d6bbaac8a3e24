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

#ifndef FEDICU_MATRIX_H_
#define FEDICU_MATRIX_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedicu/errors.h"

namespace fedicu {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  // Appends one row. The first row fixes the width of an empty matrix.
  void AppendRow(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) {
      throw DimensionError("row width " + std::to_string(values.size()) +
                           " does not match matrix width " +
                           std::to_string(cols_));
    }
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  // Rows picked by index, in the given order.
  Matrix SelectRows(std::span<const std::size_t> indices) const {
    Matrix out(0, cols_);
    out.data_.reserve(indices.size() * cols_);
    for (std::size_t i : indices) out.AppendRow(row(i));
    return out;
  }

  std::span<const double> data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Feature rows with binary labels.
struct Samples {
  Matrix x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  bool empty() const { return y.empty(); }

  Samples Select(std::span<const std::size_t> indices) const {
    Samples out{x.SelectRows(indices), {}};
    out.y.reserve(indices.size());
    for (std::size_t i : indices) out.y.push_back(y[i]);
    return out;
  }

  friend bool operator==(const Samples&, const Samples&) = default;
};

// One hospital's private shard. Never serialized onto the wire.
struct HospitalDataset {
  std::uint32_t hospital_id = 0;
  Samples train;
  Samples test;
};

}  // namespace fedicu

#endif  // FEDICU_MATRIX_H_
