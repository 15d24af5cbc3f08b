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

#ifndef HELD_ALIGNMENT_ALIGNMENT_HPP_
#define HELD_ALIGNMENT_ALIGNMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "held/common/linalg.hpp"

namespace held::alignment {

inline constexpr double kDefaultLambda = 1e-4;

// Everything the ridge solve needs, without raw rows. Source rows (Party B)
// are the regressors, target rows (Party A) the responses.
class SufficientStats {
 public:
  SufficientStats(Eigen::Index source_dim, Eigen::Index target_dim);

  // gram += B^T B, cross += B^T A, sums and count updated.
  void Accumulate(const Matrix& batch_source, const Matrix& batch_target);
  // Associative and commutative.
  void Merge(const SufficientStats& other);

  // Assembles stats from pieces computed elsewhere, e.g. a cross product
  // recovered by decryption.
  static SufficientStats FromParts(Matrix gram, Matrix cross, Vector sum_source,
                                   Vector sum_target, std::int64_t count);

  const Matrix& gram() const { return gram_; }
  const Matrix& cross() const { return cross_; }
  const Vector& sum_source() const { return sum_source_; }
  const Vector& sum_target() const { return sum_target_; }
  std::int64_t count() const { return count_; }
  Eigen::Index source_dim() const { return gram_.rows(); }
  Eigen::Index target_dim() const { return cross_.cols(); }

 private:
  Matrix gram_;        // d_B x d_B
  Matrix cross_;       // d_B x d_A
  Vector sum_source_;  // d_B
  Vector sum_target_;  // d_A
  std::int64_t count_ = 0;
};

// z_target ~= z_source * W + b.
struct AffineMap {
  Matrix weight;  // d_B x d_A
  Vector bias;    // d_A
  double lambda = kDefaultLambda;
  std::int64_t n_train = 0;
  bool fit_bias = true;
  std::string source_model_id;
  std::string target_model_id;

  Eigen::Index source_dim() const { return weight.rows(); }
  Eigen::Index target_dim() const { return weight.cols(); }
  void Validate() const;
};

struct SolveOptions {
  // Without a bias the uncentered normal equations are solved and b = 0.
  bool fit_bias = true;
};

// W = (G_c + lambda I)^{-1} C_c with mean-centered gram/cross,
// b = mean_A - mean_B W. Cholesky factorization, no explicit inverse.
AffineMap Solve(const SufficientStats& stats, double lambda,
                const SolveOptions& options = {});

Matrix Apply(const AffineMap& map, const Matrix& source);

struct FitReport {
  double train_mse = 0.0;
  std::optional<double> holdout_mse;
  std::int64_t n_train = 0;
};

struct FitResult {
  AffineMap map;
  FitReport report;
};

// Mean over all entries of the squared residual.
double MeanSquaredError(const AffineMap& map, const Matrix& source,
                        const Matrix& target);

FitResult Fit(const Matrix& source, const Matrix& target,
              double lambda = kDefaultLambda, const SolveOptions& options = {});

// Holds out the last ceil(holdout_fraction * n) rows, then fits one map per
// prefix size of the remaining rows. Reports come back ordered by size.
std::vector<FitReport> SweepTrainingSize(const Matrix& source,
                                         const Matrix& target, double lambda,
                                         std::vector<std::int64_t> sizes,
                                         double holdout_fraction,
                                         const SolveOptions& options = {});

// Ridge objective ||B W + 1 b^T - A||_F^2 + lambda ||W||_F^2.
double RidgeObjective(const Matrix& source, const Matrix& target,
                      const Matrix& weight, const Vector& bias, double lambda);

// Sidecar JSON at `path` plus `<name>.W.tns` / `<name>.b.tns` beside it.
void SaveAffineMap(const std::filesystem::path& path, const AffineMap& map);
AffineMap LoadAffineMap(const std::filesystem::path& path);

}  // namespace held::alignment

#endif  // HELD_ALIGNMENT_ALIGNMENT_HPP_
