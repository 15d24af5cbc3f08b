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

#ifndef HELD_SIMILARITY_SIMILARITY_HPP_
#define HELD_SIMILARITY_SIMILARITY_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "held/common/linalg.hpp"
#include "nlohmann/json.hpp"

namespace held::similarity {

// Arithmetic mean over the rows (tokens) of an L x d block.
Vector MeanPool(const Matrix& token_states);

// Linear CKA on column-centered inputs:
//   ||A^T B||_F^2 / (||A^T A||_F ||B^T B||_F)
// Inputs must share the row count (n >= 2). Throws when either side
// centers to all zeros.
double LinearCka(const Matrix& a, const Matrix& b);

struct Pca {
  RowVector mean;
  Matrix components;  // d x r, orthonormal columns
  Vector singular_values;
  int rank = 0;

  Matrix Project(const Matrix& x) const;
};

// Keeps min(n_components, numerical rank) leading directions.
Pca FitPca(const Matrix& x, int n_components);

struct Cca {
  Vector correlations;  // non-increasing, training-set canonical correlations
  Matrix directions_a;  // ka x r
  Matrix directions_b;  // kb x r
};

// Whitening + SVD of the whitened cross-covariance; `epsilon` is added to
// both covariance diagonals.
Cca FitCca(const Matrix& a, const Matrix& b, double epsilon = 1e-8);

struct SvccaOptions {
  int n_components = 64;
  int n_repeats = 3;
  std::uint64_t seed = 0;
  // Svcca(): fraction of rows used to fit the transforms in each repeat.
  double train_fraction = 0.8;
  // Svcca(): fit and evaluate on the same rows.
  bool single_split = false;
  // SvccaSplit(): fraction of training rows subsampled per repeat.
  double subsample_fraction = 0.9;
  double epsilon = 1e-8;
  bool shuffled_baseline = true;
};

struct SvccaReport {
  int n_components = 0;
  int retained_components = 0;
  bool rank_deficient = false;
  int n_repeats = 0;
  // Absolute eval-set correlations sorted non-increasing, averaged
  // position-wise across repeats.
  std::vector<double> per_component_corrs;
  double mean_corr = 0.0;
  double median_corr = 0.0;
  std::optional<double> shuffled_baseline_mean;
};

// Splits rows at random into train/eval in every repeat.
SvccaReport Svcca(const Matrix& a, const Matrix& b, const SvccaOptions& options);

// Fits on (train_a, train_b), reports on (eval_a, eval_b).
SvccaReport SvccaSplit(const Matrix& train_a, const Matrix& train_b,
                       const Matrix& eval_a, const Matrix& eval_b,
                       const SvccaOptions& options);

nlohmann::json ToJson(const SvccaReport& report);

}  // namespace held::similarity

#endif  // HELD_SIMILARITY_SIMILARITY_HPP_
