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

#include "held/he_backend/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <openssl/evp.h>
#include <openssl/rand.h>

#include "held/common/error.hpp"

namespace held::he {

std::uint64_t RandomSource::NextU64() {
  std::uint8_t bytes[8];
  Fill(bytes, sizeof bytes);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

std::uint64_t RandomSource::Uniform(std::uint64_t bound) {
  Require(bound > 0, "uniform bound must be positive");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  for (;;) {
    const std::uint64_t v = NextU64();
    if (v < limit) return v % bound;
  }
}

double RandomSource::UniformOpen() {
  return (static_cast<double>(NextU64() >> 11) + 0.5) * 0x1.0p-53;
}

std::int64_t RandomSource::DiscreteGaussian(double sigma) {
  const double cut = 6.0 * sigma;
  for (;;) {
    const double r = std::sqrt(-2.0 * std::log(UniformOpen()));
    const double x = sigma * r * std::cos(2.0 * M_PI * UniformOpen());
    if (std::abs(x) <= cut) return std::llround(x);
  }
}

std::int64_t RandomSource::Ternary() {
  return static_cast<std::int64_t>(Uniform(3)) - 1;
}

SeededRandom::SeededRandom(std::uint64_t seed, std::uint64_t stream) {
  std::uint8_t key[32] = {};
  std::uint8_t iv[16] = {};
  for (int i = 0; i < 8; ++i) {
    key[i] = static_cast<std::uint8_t>(seed >> (8 * i));
    iv[8 + i] = static_cast<std::uint8_t>(stream >> (8 * i));
  }
  auto* ctx = EVP_CIPHER_CTX_new();
  if (ctx == nullptr ||
      EVP_EncryptInit_ex(ctx, EVP_chacha20(), nullptr, key, iv) != 1) {
    EVP_CIPHER_CTX_free(ctx);
    throw RuntimeFailure("cannot initialise ChaCha20 keystream");
  }
  ctx_ = ctx;
}

SeededRandom::~SeededRandom() {
  EVP_CIPHER_CTX_free(static_cast<EVP_CIPHER_CTX*>(ctx_));
}

void SeededRandom::Refill() {
  static const std::array<std::uint8_t, 4096> kZeros{};
  int len = 0;
  if (EVP_EncryptUpdate(static_cast<EVP_CIPHER_CTX*>(ctx_), buffer_.data(), &len,
                        kZeros.data(), static_cast<int>(kZeros.size())) != 1 ||
      len != static_cast<int>(buffer_.size())) {
    throw RuntimeFailure("ChaCha20 keystream failed");
  }
  pos_ = 0;
}

void SeededRandom::Fill(std::uint8_t* out, std::size_t len) {
  while (len > 0) {
    if (pos_ == buffer_.size()) Refill();
    const std::size_t take = std::min(len, buffer_.size() - pos_);
    std::memcpy(out, buffer_.data() + pos_, take);
    pos_ += take;
    out += take;
    len -= take;
  }
}

void SystemRandom::Fill(std::uint8_t* out, std::size_t len) {
  while (len > 0) {
    if (pos_ == buffer_.size()) {
      if (RAND_bytes(buffer_.data(), static_cast<int>(buffer_.size())) != 1) {
        throw RuntimeFailure("RAND_bytes failed");
      }
      pos_ = 0;
    }
    const std::size_t take = std::min(len, buffer_.size() - pos_);
    std::memcpy(out, buffer_.data() + pos_, take);
    pos_ += take;
    out += take;
    len -= take;
  }
}

std::unique_ptr<RandomSource> MakeRandom(std::optional<std::uint64_t> seed,
                                         std::uint64_t stream) {
  if (seed) return std::make_unique<SeededRandom>(*seed, stream);
  return std::make_unique<SystemRandom>();
}

}  // namespace held::he
