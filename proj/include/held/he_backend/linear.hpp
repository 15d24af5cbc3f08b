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

#ifndef HELD_HE_BACKEND_LINEAR_HPP_
#define HELD_HE_BACKEND_LINEAR_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "held/common/linalg.hpp"
#include "held/he_backend/backend.hpp"

namespace held::he {

std::size_t NextPowerOfTwo(std::size_t n);

// Slot layout for an encrypted d-vector times a plaintext d x K matrix.
// The query is zero-padded to `period` and tiled over every slot.
struct MatVecPlan {
  std::size_t input_dim = 0;
  std::size_t outputs = 0;
  std::size_t outputs_pad = 0;  // K rounded up to a power of two
  std::size_t period = 0;       // max(next_pow2(d), outputs_pad)
};

MatVecPlan PlanMatVec(std::size_t slot_count, std::size_t input_dim,
                      std::size_t outputs);

// Galois steps MatVecCtPt uses under `plan`.
std::vector<int> MatVecRotationSteps(const MatVecPlan& plan);

// `v` zero-padded to `period` and repeated across `slot_count` slots.
std::vector<double> Replicate(std::span<const double> v, std::size_t period,
                              std::size_t slot_count);

// Sum of u_i w_i in slot 0; in every slot when the input is replicated with
// period next_pow2(d). One multiplication, log2(d) rotations.
Ciphertext InnerProductCtPt(const Backend& backend, const PublicMaterial& pub,
                            const Ciphertext& ct, std::span<const double> w);

// Slot k < K holds (z M + c)_k for a query laid out per PlanMatVec.
// Diagonal method: K baby-step rotations, one rescale, then log2(period / K)
// giant-step rotate-and-adds. Consumes exactly one level of depth.
Ciphertext MatVecCtPt(const Backend& backend, const PublicMaterial& pub,
                      const Ciphertext& query, const Matrix& m, const Vector& bias);

// acc += scalar * ct without rescaling; the caller rescales once at the end.
void ScalarMulAccumulate(const Backend& backend, std::optional<Ciphertext>& acc,
                         const Ciphertext& ct, double scalar);

}  // namespace held::he

#endif  // HELD_HE_BACKEND_LINEAR_HPP_
