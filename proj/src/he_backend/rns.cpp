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

#include "held/he_backend/rns.hpp"

#include <algorithm>
#include <string>

#include "held/common/error.hpp"

namespace held::he {

namespace {

// floor(a * b / 2^64) style Shoup helpers.
std::uint64_t ShoupPrecompute(std::uint64_t w, std::uint64_t q) {
  return static_cast<std::uint64_t>((static_cast<u128>(w) << 64) / q);
}

inline std::uint64_t ShoupMul(std::uint64_t a, std::uint64_t w,
                              std::uint64_t w_shoup, std::uint64_t q) {
  const auto hi = static_cast<std::uint64_t>((static_cast<u128>(a) * w_shoup) >> 64);
  std::uint64_t r = a * w - hi * q;
  return r >= q ? r - q : r;
}

std::uint64_t PowMod128(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
  u128 result = 1, b = base % m;
  while (exp > 0) {
    if (exp & 1) result = result * b % m;
    b = b * b % m;
    exp >>= 1;
  }
  return static_cast<std::uint64_t>(result);
}

}  // namespace

Modulus::Modulus(std::uint64_t q) : q_(q) {
  Require(q >= 3 && q < (std::uint64_t{1} << 62), "modulus must be in [3, 2^62)");
  const u128 ratio = ~static_cast<u128>(0) / q;
  ratio_lo_ = static_cast<std::uint64_t>(ratio);
  ratio_hi_ = static_cast<std::uint64_t>(ratio >> 64);
}

std::uint64_t Modulus::Pow(std::uint64_t base, std::uint64_t exp) const {
  std::uint64_t result = 1;
  base %= q_;
  while (exp > 0) {
    if (exp & 1) result = Mul(result, base);
    base = Mul(base, base);
    exp >>= 1;
  }
  return result;
}

std::uint64_t Modulus::Inverse(std::uint64_t a) const {
  Require(a % q_ != 0, "zero has no inverse");
  return Pow(a, q_ - 2);
}

bool IsPrime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  for (std::uint64_t a : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    std::uint64_t x = PowMod128(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = static_cast<std::uint64_t>(static_cast<u128>(x) * x % n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

std::vector<std::uint64_t> GenerateNttPrimes(const std::vector<int>& bits,
                                             std::size_t n) {
  const std::uint64_t step = 2 * static_cast<std::uint64_t>(n);
  std::vector<std::uint64_t> out;
  for (int b : bits) {
    Require(b >= 20 && b <= 61, "prime bit sizes must be in [20, 61]");
    const std::uint64_t upper = std::uint64_t{1} << b;
    std::uint64_t cand = (upper - 1) / step * step + 1;
    if (cand >= upper) cand -= step;
    const std::uint64_t lower = std::uint64_t{1} << (b - 1);
    bool found = false;
    for (; cand > lower; cand -= step) {
      if (IsPrime(cand) && std::find(out.begin(), out.end(), cand) == out.end()) {
        found = true;
        break;
      }
    }
    if (!found) {
      throw InvalidArgument("no NTT prime of " + std::to_string(b) + " bits");
    }
    out.push_back(cand);
  }
  return out;
}

std::size_t BitReverse(std::size_t x, int bits) {
  std::size_t r = 0;
  for (int i = 0; i < bits; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

NttTables::NttTables(std::size_t n, const Modulus& q) : n_(n), q_(q) {
  Require(n >= 2 && (n & (n - 1)) == 0, "NTT size must be a power of two");
  const std::uint64_t qv = q.value();
  Require((qv - 1) % (2 * n) == 0, "modulus is not 1 mod 2n");
  // smallest generator-derived primitive 2n-th root
  for (std::uint64_t x = 2;; ++x) {
    const std::uint64_t cand = q.Pow(x, (qv - 1) / (2 * n));
    if (q.Pow(cand, n) == qv - 1) {
      psi_ = cand;
      break;
    }
  }
  int log_n = 0;
  while ((std::size_t{1} << log_n) < n) ++log_n;
  root_.resize(n);
  inv_root_.resize(n);
  root_shoup_.resize(n);
  inv_root_shoup_.resize(n);
  const std::uint64_t psi_inv = q.Inverse(psi_);
  std::uint64_t pw = 1, ipw = 1;
  std::vector<std::uint64_t> pows(n), ipows(n);
  for (std::size_t i = 0; i < n; ++i) {
    pows[i] = pw;
    ipows[i] = ipw;
    pw = q.Mul(pw, psi_);
    ipw = q.Mul(ipw, psi_inv);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = BitReverse(i, log_n);
    root_[i] = pows[r];
    inv_root_[i] = ipows[r];
    root_shoup_[i] = ShoupPrecompute(root_[i], qv);
    inv_root_shoup_[i] = ShoupPrecompute(inv_root_[i], qv);
  }
  n_inv_ = q.Inverse(n % qv);
  n_inv_shoup_ = ShoupPrecompute(n_inv_, qv);
}

void NttTables::Forward(std::uint64_t* a) const {
  const std::uint64_t q = q_.value();
  std::size_t t = n_;
  for (std::size_t m = 1; m < n_; m <<= 1) {
    t >>= 1;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j1 = 2 * i * t;
      const std::uint64_t w = root_[m + i], ws = root_shoup_[m + i];
      for (std::size_t j = j1; j < j1 + t; ++j) {
        const std::uint64_t u = a[j];
        const std::uint64_t v = ShoupMul(a[j + t], w, ws, q);
        const std::uint64_t s = u + v;
        a[j] = s >= q ? s - q : s;
        a[j + t] = u >= v ? u - v : u + q - v;
      }
    }
  }
}

void NttTables::Inverse(std::uint64_t* a) const {
  const std::uint64_t q = q_.value();
  std::size_t t = 1;
  for (std::size_t m = n_; m > 1; m >>= 1) {
    const std::size_t h = m >> 1;
    std::size_t j1 = 0;
    for (std::size_t i = 0; i < h; ++i) {
      const std::uint64_t w = inv_root_[h + i], ws = inv_root_shoup_[h + i];
      for (std::size_t j = j1; j < j1 + t; ++j) {
        const std::uint64_t u = a[j];
        const std::uint64_t v = a[j + t];
        const std::uint64_t s = u + v;
        a[j] = s >= q ? s - q : s;
        a[j + t] = ShoupMul(u >= v ? u - v : u + q - v, w, ws, q);
      }
      j1 += 2 * t;
    }
    t <<= 1;
  }
  for (std::size_t j = 0; j < n_; ++j) a[j] = ShoupMul(a[j], n_inv_, n_inv_shoup_, q);
}

std::vector<std::uint32_t> GaloisNttPermutation(std::size_t n, std::uint64_t g) {
  int log_n = 0;
  while ((std::size_t{1} << log_n) < n) ++log_n;
  const std::uint64_t two_n = 2 * static_cast<std::uint64_t>(n);
  std::vector<std::uint32_t> map(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint64_t e = 2 * BitReverse(k, log_n) + 1;
    const std::uint64_t eg = e * g % two_n;
    map[k] = static_cast<std::uint32_t>(BitReverse((eg - 1) / 2, log_n));
  }
  return map;
}

}  // namespace held::he
