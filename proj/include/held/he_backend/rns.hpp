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

#ifndef HELD_HE_BACKEND_RNS_HPP_
#define HELD_HE_BACKEND_RNS_HPP_

// Word-size modular arithmetic and the negacyclic NTT. Exposed so the
// arithmetic can be tested directly; most callers want backend.hpp.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace held::he {

using u128 = unsigned __int128;

class Modulus {
 public:
  Modulus() = default;
  explicit Modulus(std::uint64_t q);

  std::uint64_t value() const { return q_; }

  // x mod q for any 128-bit x (Barrett).
  std::uint64_t Reduce(u128 x) const {
    const auto x0 = static_cast<std::uint64_t>(x);
    const auto x1 = static_cast<std::uint64_t>(x >> 64);
    const u128 p00 = static_cast<u128>(x0) * ratio_lo_;
    const u128 p01 = static_cast<u128>(x0) * ratio_hi_;
    const u128 p10 = static_cast<u128>(x1) * ratio_lo_;
    const u128 mid = (p00 >> 64) + static_cast<std::uint64_t>(p01) +
                     static_cast<std::uint64_t>(p10);
    const std::uint64_t quot = static_cast<std::uint64_t>(p01 >> 64) +
                               static_cast<std::uint64_t>(p10 >> 64) +
                               x1 * ratio_hi_ +
                               static_cast<std::uint64_t>(mid >> 64);
    std::uint64_t r = x0 - quot * q_;
    while (r >= q_) r -= q_;
    return r;
  }
  std::uint64_t Mul(std::uint64_t a, std::uint64_t b) const {
    return Reduce(static_cast<u128>(a) * b);
  }
  std::uint64_t Add(std::uint64_t a, std::uint64_t b) const {
    const std::uint64_t s = a + b;
    return s >= q_ ? s - q_ : s;
  }
  std::uint64_t Sub(std::uint64_t a, std::uint64_t b) const {
    return a >= b ? a - b : a + q_ - b;
  }
  std::uint64_t Neg(std::uint64_t a) const { return a == 0 ? 0 : q_ - a; }
  // floor(w * 2^64 / q) for MulShoup with a fixed multiplicand w < q.
  std::uint64_t ShoupFactor(std::uint64_t w) const {
    return static_cast<std::uint64_t>((static_cast<u128>(w) << 64) / q_);
  }
  std::uint64_t MulShoup(std::uint64_t x, std::uint64_t w, std::uint64_t w_shoup) const {
    const auto hi = static_cast<std::uint64_t>((static_cast<u128>(x) * w_shoup) >> 64);
    const std::uint64_t r = x * w - hi * q_;
    return r >= q_ ? r - q_ : r;
  }
  // Signed value to its residue.
  std::uint64_t FromSigned(std::int64_t v) const {
    if (v >= 0) return static_cast<std::uint64_t>(v) % q_;
    const std::uint64_t r = (0 - static_cast<std::uint64_t>(v)) % q_;
    return r == 0 ? 0 : q_ - r;
  }
  std::uint64_t Pow(std::uint64_t base, std::uint64_t exp) const;
  std::uint64_t Inverse(std::uint64_t a) const;

 private:
  std::uint64_t q_ = 0;
  std::uint64_t ratio_lo_ = 0;  // floor(2^128 / q)
  std::uint64_t ratio_hi_ = 0;
};

// Deterministic Miller-Rabin for 64-bit inputs.
bool IsPrime(std::uint64_t n);

// Distinct primes p = 1 mod 2n, the largest below 2^bits for each entry.
std::vector<std::uint64_t> GenerateNttPrimes(const std::vector<int>& bits,
                                             std::size_t n);

// Negacyclic NTT over Z_q[X]/(X^n + 1). Forward takes coefficients in
// natural order and leaves evaluations at psi^(2 brv(k) + 1) in slot k.
class NttTables {
 public:
  NttTables(std::size_t n, const Modulus& q);

  void Forward(std::uint64_t* a) const;
  void Inverse(std::uint64_t* a) const;

  std::size_t n() const { return n_; }
  const Modulus& modulus() const { return q_; }
  std::uint64_t psi() const { return psi_; }

 private:
  std::size_t n_;
  Modulus q_;
  std::uint64_t psi_ = 0;
  std::uint64_t n_inv_ = 0;
  std::uint64_t n_inv_shoup_ = 0;
  std::vector<std::uint64_t> root_;  // psi^brv(k)
  std::vector<std::uint64_t> root_shoup_;
  std::vector<std::uint64_t> inv_root_;  // psi^-brv(k)
  std::vector<std::uint64_t> inv_root_shoup_;
};

std::size_t BitReverse(std::size_t x, int bits);

// Index map for X -> X^g applied to NTT-form data: out[k] = in[map[k]].
std::vector<std::uint32_t> GaloisNttPermutation(std::size_t n, std::uint64_t g);

}  // namespace held::he

#endif  // HELD_HE_BACKEND_RNS_HPP_
