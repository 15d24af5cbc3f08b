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

#ifndef HELD_HE_BACKEND_PARAMS_HPP_
#define HELD_HE_BACKEND_PARAMS_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace held::he {

enum class SecurityLevel { kMock, kBits128 };

struct EncryptionParams {
  std::size_t ring_degree = 8192;
  // Data primes from the bottom of the chain up, then the key-switching
  // prime last.
  std::vector<int> modulus_bits = {60, 40, 40, 60};
  int scale_bits = 40;
  SecurityLevel security = SecurityLevel::kBits128;
  // Multiplications allowed on any ciphertext.
  int max_depth = 1;

  std::size_t slot_count() const { return ring_degree / 2; }
  // Level of a fresh ciphertext; level l carries primes q_0 .. q_l.
  int top_level() const { return static_cast<int>(modulus_bits.size()) - 2; }
  double scale() const;
  int total_bits() const;

  void Validate() const;
  // Stable 64-bit fingerprint; mock and real parameters differ.
  std::uint64_t Hash() const;
  std::string Name() const;
};

inline constexpr std::string_view kMockPreset = "mock";
inline constexpr std::string_view kCkksPreset = "ckks-8192-depth1";

EncryptionParams ParamsFromPreset(std::string_view name);

// Largest total modulus (including the special prime) for 128-bit security
// with ternary secrets, by ring degree; 0 when the degree is not listed.
int MaxModulusBits128(std::size_t ring_degree);

}  // namespace held::he

#endif  // HELD_HE_BACKEND_PARAMS_HPP_
