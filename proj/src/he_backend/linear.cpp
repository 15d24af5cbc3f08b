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

#include "held/he_backend/linear.hpp"

namespace held::he {

std::size_t NextPowerOfTwo(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

MatVecPlan PlanMatVec(std::size_t slot_count, std::size_t input_dim,
                      std::size_t outputs) {
  Require(input_dim >= 1 && outputs >= 1, "matvec dimensions must be positive");
  MatVecPlan plan;
  plan.input_dim = input_dim;
  plan.outputs = outputs;
  plan.outputs_pad = NextPowerOfTwo(outputs);
  plan.period = std::max(NextPowerOfTwo(input_dim), plan.outputs_pad);
  RequireDims(plan.period <= slot_count, "matvec does not fit in the slot count");
  return plan;
}

std::vector<double> Replicate(std::span<const double> v, std::size_t period,
                              std::size_t slot_count) {
  Require(period >= 1 && v.size() <= period && slot_count % period == 0,
          "replication period must hold the vector and divide the slot count");
  std::vector<double> out(slot_count, 0.0);
  for (std::size_t t = 0; t < slot_count; ++t) {
    const std::size_t i = t % period;
    if (i < v.size()) out[t] = v[i];
  }
  return out;
}

std::vector<int> MatVecRotationSteps(const MatVecPlan& plan) {
  std::vector<int> steps;
  if (plan.outputs_pad > 1) steps.push_back(1);
  for (std::size_t shift = plan.outputs_pad; shift < plan.period; shift <<= 1) {
    if (shift > 1) steps.push_back(static_cast<int>(shift));
  }
  return steps;
}

Ciphertext InnerProductCtPt(const Backend& backend, const PublicMaterial& pub,
                            const Ciphertext& ct, std::span<const double> w) {
  Require(!w.empty(), "inner product with an empty vector");
  const std::size_t period = NextPowerOfTwo(w.size());
  RequireDims(period <= backend.slot_count(), "vector longer than the slot count");
  Ciphertext acc = backend.MulPlain(ct, Replicate(w, period, backend.slot_count()));
  for (std::size_t shift = 1; shift < period; shift <<= 1) {
    acc = backend.Add(acc, backend.Rotate(pub, acc, static_cast<int>(shift)));
  }
  return acc;
}

Ciphertext MatVecCtPt(const Backend& backend, const PublicMaterial& pub,
                      const Ciphertext& query, const Matrix& m, const Vector& bias) {
  RequireDims(bias.size() == m.cols(), "bias length differs from matrix columns");
  const MatVecPlan plan = PlanMatVec(backend.slot_count(), static_cast<std::size_t>(m.rows()),
                                     static_cast<std::size_t>(m.cols()));
  const std::size_t slots = backend.slot_count();
  const std::size_t kp = plan.outputs_pad, period = plan.period;
  const auto d = static_cast<std::size_t>(m.rows());
  const auto k = static_cast<std::size_t>(m.cols());

  std::optional<Ciphertext> sum;
  Ciphertext rotated = query;
  std::vector<double> diag(slots);
  for (std::size_t i = 0; i < kp; ++i) {
    if (i > 0) rotated = backend.RotateStep(pub, rotated, 1);
    for (std::size_t t = 0; t < slots; ++t) {
      const std::size_t tt = t % period;
      const std::size_t row = tt % kp;
      const std::size_t col = (tt + i) % period;
      diag[t] = row < k && col < d ? m(static_cast<Eigen::Index>(col),
                                       static_cast<Eigen::Index>(row))
                                   : 0.0;
    }
    Ciphertext term = backend.MultiplyPlainNoRescale(rotated, diag);
    sum = sum ? backend.Add(*sum, term) : std::move(term);
  }
  Ciphertext out = backend.Rescale(*sum);
  for (std::size_t shift = kp; shift < period; shift <<= 1) {
    out = backend.Add(out, backend.Rotate(pub, out, static_cast<int>(shift)));
  }
  std::vector<double> c(bias.data(), bias.data() + bias.size());
  return backend.AddPlain(out, c);
}

void ScalarMulAccumulate(const Backend& backend, std::optional<Ciphertext>& acc,
                         const Ciphertext& ct, double scalar) {
  if (acc) {
    backend.MultiplyScalarAccumulate(*acc, ct, scalar);
  } else {
    acc = backend.MultiplyScalarNoRescale(ct, scalar);
  }
}

}  // namespace held::he
