/*
 * Copyright 2026 The scoutval Authors.
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

#pragma once

#include <span>
#include <string>
#include <vector>

#include "scoutval/common.hpp"
#include "scoutval/features.hpp"

namespace scoutval {

// Dense row-major design matrix with named columns.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::vector<std::string> names, std::size_t rows)
      : names_(std::move(names)), rows_(rows), data_(rows * names_.size(), 0.0) {}

  static Matrix from_rows(std::span<const FeatureRow> rows) {
    if (rows.empty()) return Matrix();
    Matrix m(rows.front().feature_names(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& s = rows[i].structured.values;
      const auto& t = rows[i].text.values;
      if (s.size() + t.size() != m.cols()) {
        throw DomainError("feature row '" + rows[i].player_id + "' has a different layout");
      }
      double* out = m.row_ptr(i);
      std::copy(s.begin(), s.end(), out);
      std::copy(t.begin(), t.end(), out + s.size());
    }
    return m;
  }

  // Builds from plain columns.
  static Matrix from_columns(std::vector<std::string> names,
                             const std::vector<std::vector<double>>& columns) {
    const std::size_t n = columns.empty() ? 0 : columns.front().size();
    Matrix m(std::move(names), n);
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j].size() != n) throw DomainError("ragged columns");
      for (std::size_t i = 0; i < n; ++i) m(i, j) = columns[j][i];
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return names_.size(); }
  bool empty() const { return rows_ == 0; }
  const std::vector<std::string>& names() const { return names_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

  double* row_ptr(std::size_t i) { return data_.data() + i * cols(); }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols(), cols()};
  }

 private:
  std::vector<std::string> names_;
  std::size_t rows_ = 0;
  std::vector<double> data_;
};

inline std::vector<double> column_of(const Matrix& m, std::size_t j) {
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = m(i, j);
  return out;
}

}  // namespace scoutval
