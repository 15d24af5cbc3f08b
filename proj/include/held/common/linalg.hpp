/*
 * Copyright 2026 The HELD Authors.
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

#ifndef HELD_COMMON_LINALG_HPP_
#define HELD_COMMON_LINALG_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace held {

// Rows are samples throughout the library.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Labels = std::vector<int>;

inline bool AllFinite(const Matrix& m) { return m.allFinite(); }

// Selects rows of `m` in the order given by `rows`.
inline Matrix TakeRows(const Matrix& m, const std::vector<std::int64_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  }
  return out;
}

inline Labels TakeLabels(const Labels& y, const std::vector<std::int64_t>& rows) {
  Labels out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(y[static_cast<std::size_t>(r)]);
  return out;
}

inline Matrix VStack(const Matrix& top, const Matrix& bottom) {
  if (top.rows() == 0) return bottom;
  if (bottom.rows() == 0) return top;
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

}  // namespace held

#endif  // HELD_COMMON_LINALG_HPP_
