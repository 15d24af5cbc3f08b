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

#include "held/he_backend/params.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "held/common/error.hpp"
#include "held/tensor_store/tensor.hpp"

namespace held::he {

double EncryptionParams::scale() const { return std::ldexp(1.0, scale_bits); }

int EncryptionParams::total_bits() const {
  int total = 0;
  for (int b : modulus_bits) total += b;
  return total;
}

int MaxModulusBits128(std::size_t ring_degree) {
  switch (ring_degree) {
    case 1024: return 27;
    case 2048: return 54;
    case 4096: return 109;
    case 8192: return 218;
    case 16384: return 438;
    case 32768: return 881;
    default: return 0;
  }
}

void EncryptionParams::Validate() const {
  Require(ring_degree >= 16 && (ring_degree & (ring_degree - 1)) == 0,
          "ring degree must be a power of two >= 16");
  Require(modulus_bits.size() >= 3,
          "modulus chain needs at least two data primes and a special prime");
  for (int b : modulus_bits) Require(b >= 20 && b <= 60, "prime sizes must be 20..60 bits");
  Require(scale_bits >= 10 && scale_bits < modulus_bits.front(),
          "scale must be below the base prime");
  Require(max_depth >= 1 && max_depth <= top_level(),
          "depth budget must fit the modulus chain");
  Require(modulus_bits.back() >= *std::max_element(modulus_bits.begin(),
                                                   modulus_bits.end() - 1),
          "special prime must be at least as large as every data prime");
  if (security == SecurityLevel::kBits128) {
    const int limit = MaxModulusBits128(ring_degree);
    Require(limit > 0 && total_bits() <= limit,
            "parameters do not meet the 128-bit security table");
  }
}

std::string EncryptionParams::Name() const {
  std::ostringstream os;
  os << (security == SecurityLevel::kMock ? "mock" : "ckks") << "-N" << ring_degree
     << "-q";
  for (std::size_t i = 0; i < modulus_bits.size(); ++i) {
    os << (i ? "." : "") << modulus_bits[i];
  }
  os << "-s" << scale_bits << "-d" << max_depth;
  return os.str();
}

std::uint64_t EncryptionParams::Hash() const {
  const std::string name = Name();
  const std::string hex =
      tensor_store::Sha256Hex(std::vector<std::uint8_t>(name.begin(), name.end()));
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

EncryptionParams ParamsFromPreset(std::string_view name) {
  EncryptionParams p;
  if (name == kMockPreset) {
    p.security = SecurityLevel::kMock;
  } else if (name != kCkksPreset) {
    throw InvalidArgument("unknown HE preset '" + std::string(name) +
                          "' (expected mock or ckks-8192-depth1)");
  }
  p.Validate();
  return p;
}

}  // namespace held::he
