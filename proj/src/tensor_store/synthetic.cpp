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

#include "held/tensor_store/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "held/common/error.hpp"

namespace held::tensor_store {

void SyntheticSpec::Validate() const {
  Require(n >= 0, "n must be non-negative");
  Require(latent_dim >= 1, "latent_dim must be positive");
  Require(latent_dim <= std::min(d_a, d_b),
          "latent_dim must not exceed min(d_A, d_B)");
  Require(noise_std >= 0.0, "noise_std must be non-negative");
  Require(n_classes >= 2, "n_classes must be at least 2");
}

Matrix GaussianMatrix(Eigen::Index rows, Eigen::Index cols,
                      std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

Matrix RandomOrthonormal(Eigen::Index rows, Eigen::Index cols,
                         std::mt19937_64& rng) {
  Require(cols <= rows, "cannot draw more orthonormal columns than rows");
  const Matrix g = GaussianMatrix(rows, cols, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  // Fix signs so the draw is Haar distributed and deterministic.
  const Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  return q;
}

SyntheticWorld::SyntheticWorld(const SyntheticSpec& spec) : spec_(spec) {
  spec_.Validate();
  std::mt19937_64 rng(spec_.seed);
  if (spec_.random_bases) {
    truth_.basis_a = RandomOrthonormal(spec_.d_a, spec_.latent_dim, rng);
    truth_.basis_b = RandomOrthonormal(spec_.d_b, spec_.latent_dim, rng);
  } else {
    truth_.basis_a = Matrix::Identity(spec_.d_a, spec_.latent_dim);
    truth_.basis_b = Matrix::Identity(spec_.d_b, spec_.latent_dim);
  }
  truth_.teacher = GaussianMatrix(spec_.latent_dim, spec_.n_classes, rng);
}

SyntheticPair SyntheticWorld::Sample(std::int64_t n, std::uint64_t sample_seed,
                                     const LatentShift& shift) const {
  Require(n >= 0, "n must be non-negative");
  std::mt19937_64 rng(sample_seed);
  const int k = spec_.latent_dim;
  SyntheticPair out;
  out.truth = truth_;
  out.latent = GaussianMatrix(n, k, rng);

  const bool reshaped = shift.rotation_deg != 0.0 || shift.minor_scale != 1.0;
  if (reshaped) {
    const double theta = shift.rotation_deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    for (int j = 0; j + 1 < k; j += 2) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double u = out.latent(i, j);
        const double v = out.latent(i, j + 1) * shift.minor_scale;
        out.latent(i, j) = c * u - s * v;
        out.latent(i, j + 1) = s * u + c * v;
      }
    }
  }
  out.latent *= shift.radial_scale;

  out.z_a = out.latent * truth_.basis_a.transpose();
  out.z_b = out.latent * truth_.basis_b.transpose();
  if (spec_.noise_std > 0.0) {
    out.z_a += spec_.noise_std * GaussianMatrix(n, spec_.d_a, rng);
    out.z_b += spec_.noise_std * GaussianMatrix(n, spec_.d_b, rng);
  }

  const Matrix scores = out.latent * truth_.teacher;
  out.labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    scores.row(i).maxCoeff(&best);
    out.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

SyntheticPair SynthPaired(const SyntheticSpec& spec) {
  SyntheticWorld world(spec);
  // Derive the sample stream from the same seed, offset from the world draw.
  return world.Sample(spec.n, spec.seed ^ 0x9e3779b97f4a7c15ULL);
}

}  // namespace held::tensor_store
