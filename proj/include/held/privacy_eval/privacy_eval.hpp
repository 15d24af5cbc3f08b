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

#ifndef HELD_PRIVACY_EVAL_PRIVACY_EVAL_HPP_
#define HELD_PRIVACY_EVAL_PRIVACY_EVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "held/alignment/alignment.hpp"
#include "held/common/linalg.hpp"
#include "nlohmann/json.hpp"

namespace held::privacy_eval {

inline constexpr int kTopSingularValues = 64;
// fro, spectral, 8 row/column statistics, 64 singular values, effective
// rank, bias norm.
inline constexpr int kFeatureCount = 76;

// Names in feature order.
std::vector<std::string> FeatureNames();

// Largest singular value by power iteration on W^T W.
double SpectralNorm(const Matrix& w, int max_iter = 200, double tol = 1e-8);

// exp(-sum p_i log p_i) with p_i = s_i / sum(s). Zero for an all-zero input.
double EffectiveRank(const Vector& singular_values);

// Order: [0] ||W||_F, [1] spectral norm, [2..5] mean/std of row means and
// mean/std of row stds, [6..9] the same over columns, [10..73] top singular
// values (zero padded), [74] effective rank, [75] ||b||_2. Row and column
// stds are population stds.
Vector WStarFeatures(const alignment::AffineMap& map);

// sqrt(d_A d_B) / N with the constant fixed to 1.
double TheoreticalAdvantage(std::int64_t d_a, std::int64_t d_b, std::int64_t n);
// 0.5 + advantage, capped at 1.
double TheoreticalAccuracyBound(std::int64_t d_a, std::int64_t d_b, std::int64_t n);

// Exact two-sided binomial test (minimum-likelihood rule).
double BinomialTwoSidedP(std::int64_t successes, std::int64_t trials, double p = 0.5);

// Row-paired embeddings: `a` in the target space, `b` in the source space.
struct PairedPool {
  Matrix a;
  Matrix b;
  Eigen::Index rows() const { return a.rows(); }
};

struct MiaConfig {
  int n_shadow_in = 100;
  int n_shadow_out = 100;
  int id_subset_size = 128;
  std::int64_t target_index = 0;  // row of the in-distribution pool
  double lambda = alignment::kDefaultLambda;
  int folds = 5;
  std::uint64_t seed = 0;
  // IN shadows also exclude the target, so labels carry no signal.
  bool null_experiment = false;
  double attack_l2 = 1e-2;

  void Validate() const;
};

struct ShadowSet {
  Matrix features;   // one row per shadow map
  Labels membership; // 1 = IN, 0 = OUT
  std::int64_t n_train = 0;  // rows behind each shadow map
  Eigen::Index d_a = 0;
  Eigen::Index d_b = 0;
};

struct MiaReport {
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;  // population std over folds
  std::vector<double> fold_accuracies;
  std::int64_t correct = 0;
  std::int64_t total = 0;
  double binomial_p = 1.0;  // pooled out-of-fold predictions vs chance
  double theoretical_advantage = 0.0;
  double theoretical_bound = 0.0;  // accuracy, 0.5 + advantage
  Vector feature_importances;      // mean |weight gap| on z-scored features
  std::int64_t n_train = 0;

  nlohmann::json ToJson() const;
};

// The public pool is fixed across shadows; each shadow draws a fresh
// in-distribution subset with (IN) or without (OUT) the target. Shadow i
// uses a seed derived from (config.seed, i), so the set does not depend on
// evaluation order.
ShadowSet BuildShadowSet(const MiaConfig& config, const PairedPool& public_pool,
                         const PairedPool& id_pool);

// Stratified k-fold logistic attack; features z-scored on training folds.
MiaReport CrossValidateAttack(const ShadowSet& shadows, int folds, std::uint64_t seed,
                              double l2 = 1e-2);

MiaReport ShadowExperiment(const MiaConfig& config, const PairedPool& public_pool,
                           const PairedPool& id_pool);

// Bundle kind "mia_features": tensors "features" and "membership".
void SaveShadowFeatures(const std::filesystem::path& path, const ShadowSet& shadows);
ShadowSet LoadShadowFeatures(const std::filesystem::path& path);

struct InfluenceConfig {
  std::vector<std::int64_t> sizes = {1000, 4000, 16000};
  int removals = 50;
  int d_a = 64;
  int d_b = 64;
  int latent_dim = 32;
  double noise_std = 0.1;
  double lambda = alignment::kDefaultLambda;
  std::uint64_t seed = 0;
  // Allowed relative deviation of each scaled constant from their mean.
  double tolerance = 0.5;
};

struct InfluencePoint {
  std::int64_t n = 0;
  double mean_influence = 0.0;  // mean ||W_full - W_minus_i||_F
  double c_sqrt = 0.0;          // mean_influence * sqrt(N)
  double c_linear = 0.0;        // mean_influence * N
};

struct InfluenceReport {
  std::vector<InfluencePoint> points;
  double loglog_slope = 0.0;  // least-squares slope of log influence vs log N
  bool stable_sqrt = false;   // every c_sqrt within tolerance of their mean
  bool stable_linear = false; // the same for c_linear

  nlohmann::json ToJson() const;
};

// Leave-one-out influence of single rows on the ridge map, measured on
// synthetic paired data. Removals are exact downdates of the sufficient
// statistics followed by a fresh solve.
InfluenceReport InfluenceScaling(const InfluenceConfig& config);

}  // namespace held::privacy_eval

#endif  // HELD_PRIVACY_EVAL_PRIVACY_EVAL_HPP_
