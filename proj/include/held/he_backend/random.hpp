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

#ifndef HELD_HE_BACKEND_RANDOM_HPP_
#define HELD_HE_BACKEND_RANDOM_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>

namespace held::he {

class RandomSource {
 public:
  virtual ~RandomSource() = default;

  virtual void Fill(std::uint8_t* out, std::size_t len) = 0;

  std::uint64_t NextU64();
  // Uniform in [0, bound), rejection sampled.
  std::uint64_t Uniform(std::uint64_t bound);
  // Uniform in (0, 1).
  double UniformOpen();
  // Rounded normal with standard deviation sigma, cut at 6 sigma.
  std::int64_t DiscreteGaussian(double sigma);
  // Uniform over {-1, 0, 1}.
  std::int64_t Ternary();
};

// ChaCha20 keystream (OpenSSL) keyed from a 64-bit seed and stream id.
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed, std::uint64_t stream = 0);
  ~SeededRandom() override;
  SeededRandom(const SeededRandom&) = delete;
  SeededRandom& operator=(const SeededRandom&) = delete;

  void Fill(std::uint8_t* out, std::size_t len) override;

 private:
  void Refill();

  void* ctx_ = nullptr;  // EVP_CIPHER_CTX
  std::array<std::uint8_t, 4096> buffer_{};
  std::size_t pos_ = 4096;
};

// Operating-system entropy via RAND_bytes.
class SystemRandom final : public RandomSource {
 public:
  void Fill(std::uint8_t* out, std::size_t len) override;

 private:
  std::array<std::uint8_t, 4096> buffer_{};
  std::size_t pos_ = 4096;
};

// Seeded when a seed is given, OS entropy otherwise.
std::unique_ptr<RandomSource> MakeRandom(std::optional<std::uint64_t> seed,
                                         std::uint64_t stream = 0);

}  // namespace held::he

#endif  // HELD_HE_BACKEND_RANDOM_HPP_
