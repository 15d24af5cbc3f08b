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

#ifndef HELD_TENSOR_STORE_SYNTHETIC_HPP_
#define HELD_TENSOR_STORE_SYNTHETIC_HPP_

#include <cstdint>
#include <random>

#include "held/common/linalg.hpp"

namespace held::tensor_store {

// Paired-embedding generator with known ground truth.
//
//   latent L ~ N(0, I) (n x k)
//   Z_A = L * basis_a^T + noise_a,   Z_B = L * basis_b^T + noise_b
//   labels = argmax(L * teacher)
//
// basis_a (d_A x k) and basis_b (d_B x k) have orthonormal columns, so with
// zero noise Z_A = Z_B * pinv(basis_b^T) * basis_a^T exactly.
struct SyntheticSpec {
  std::int64_t n = 1000;
  int latent_dim = 8;
  int d_a = 16;
  int d_b = 16;
  double noise_std = 0.0;
  int n_classes = 4;
  std::uint64_t seed = 0;
  // When false the bases are the first k columns of the identity.
  bool random_bases = true;

  void Validate() const;
};

// Reshapes the latent distribution of a sample. Each consecutive pair of
// latent coordinates has its second axis scaled by `minor_scale` and is then
// rotated by `rotation_deg`; every coordinate is finally multiplied by
// `radial_scale`. The default is the identity.
struct LatentShift {
  double rotation_deg = 0.0;
  double minor_scale = 1.0;
  double radial_scale = 1.0;
};

struct GroundTruth {
  Matrix basis_a;  // d_A x k
  Matrix basis_b;  // d_B x k
  Matrix teacher;  // k x K
};

struct SyntheticPair {
  Matrix z_a;
  Matrix z_b;
  Labels labels;
  Matrix latent;
  GroundTruth truth;
};

// Fixed bases and teacher drawn from `spec.seed`; samples drawn from
// independent per-call seeds so splits share the same geometry.
class SyntheticWorld {
 public:
  explicit SyntheticWorld(const SyntheticSpec& spec);

  SyntheticPair Sample(std::int64_t n, std::uint64_t sample_seed,
                       const LatentShift& shift = {}) const;

  const SyntheticSpec& spec() const { return spec_; }
  const GroundTruth& truth() const { return truth_; }

 private:
  SyntheticSpec spec_;
  GroundTruth truth_;
};

// One sample of `spec.n` rows drawn with `spec.seed`.
SyntheticPair SynthPaired(const SyntheticSpec& spec);

Matrix GaussianMatrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);
// Columns are orthonormal (QR of a Gaussian matrix).
Matrix RandomOrthonormal(Eigen::Index rows, Eigen::Index cols,
                         std::mt19937_64& rng);

}  // namespace held::tensor_store

#endif  // HELD_TENSOR_STORE_SYNTHETIC_HPP_
