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

// Cleartext stand-in with the real backend's bookkeeping and sizes.

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "impl.hpp"

namespace held::he::internal {

namespace {

class MockBackend final : public Backend {
 public:
  explicit MockBackend(const EncryptionParams& params) : Backend(params) {}

  using Backend::MultiplyPlainNoRescale;

  std::string_view name() const override { return kMockPreset; }

  KeyMaterial KeyGen(RandomSource& rng, const std::vector<int>& steps) const override {
    KeyMaterial keys;
    keys.secret.params_hash = hash_;
    keys.secret.key_id = rng.NextU64();
    keys.pub.params_hash = hash_;
    keys.pub.key_id = keys.secret.key_id;
    keys.pub.public_key.assign(2 * LimbsPerPoly(top_level()), 0);
    for (int step : steps) {
      Require(step > 0 && (step & (step - 1)) == 0 &&
                  static_cast<std::size_t>(step) < slot_count(),
              "rotation steps must be powers of two below the slot count");
      keys.pub.galois_keys[step].assign(GaloisKeyLimbs(), 0);
    }
    return keys;
  }

  Plaintext Encode(std::span<const double> values, int level,
                   double scale) const override {
    CheckEncodable(values, level);
    Plaintext pt;
    pt.params_hash = hash_;
    pt.level = level;
    pt.scale = scale;
    pt.length = values.size();
    pt.limbs.assign(slot_count(), 0);
    for (std::size_t i = 0; i < values.size(); ++i) pt.limbs[i] = std::bit_cast<std::uint64_t>(values[i]);
    return pt;
  }

  std::vector<double> Decode(const Plaintext& pt) const override {
    Require(pt.params_hash == hash_, "plaintext belongs to different parameters");
    return Slots(pt.limbs);
  }

  Ciphertext Encrypt(const PublicMaterial& pub, std::span<const double> values,
                     RandomSource&) const override {
    Require(pub.params_hash == hash_ && !pub.public_key.empty(),
            "public key missing or for different parameters");
    CheckEncodable(values, top_level());
    Ciphertext ct = Fresh(top_level());
    for (std::size_t i = 0; i < values.size(); ++i) Set(ct, i, values[i]);
    return ct;
  }

  Ciphertext Add(const Ciphertext& a, const Ciphertext& b) const override {
    CheckOwned(a);
    CheckOwned(b);
    CheckScalesMatch(a.scale, b.scale);
    const int level = std::min(a.level, b.level);
    Ciphertext out = DropToLevel(a, level);
    for (std::size_t i = 0; i < slot_count(); ++i) Set(out, i, Get(out, i) + Get(b, i));
    out.depth = std::max(a.depth, b.depth);
    return out;
  }

  Ciphertext AddPlain(const Ciphertext& a, std::span<const double> values) const override {
    CheckOwned(a);
    CheckEncodable(values, a.level);
    Ciphertext out = a;
    for (std::size_t i = 0; i < values.size(); ++i) Set(out, i, Get(out, i) + values[i]);
    return out;
  }

  Ciphertext MultiplyPlainNoRescale(const Ciphertext& a,
                                    const Plaintext& p) const override {
    CheckOwned(a);
    CheckMultiplicable(a);
    Require(p.params_hash == hash_ && p.level == a.level,
            "plaintext level differs from ciphertext level");
    Ciphertext out = a;
    for (std::size_t i = 0; i < slot_count(); ++i) {
      Set(out, i, Get(out, i) * std::bit_cast<double>(p.limbs[i]));
    }
    out.scale *= p.scale;
    out.depth += 1;
    return out;
  }

  Ciphertext MultiplyScalarNoRescale(const Ciphertext& a, double s) const override {
    CheckOwned(a);
    CheckMultiplicable(a);
    Require(std::isfinite(s), "scalar must be finite");
    Ciphertext out = a;
    for (std::size_t i = 0; i < slot_count(); ++i) Set(out, i, Get(out, i) * s);
    out.scale *= RescaleFactor(a.level);
    out.depth += 1;
    return out;
  }

  void MultiplyScalarAccumulate(Ciphertext& acc, const Ciphertext& a,
                                double s) const override {
    CheckAccumulable(acc, a);
    Require(std::isfinite(s), "scalar must be finite");
    for (std::size_t i = 0; i < slot_count(); ++i) Set(acc, i, Get(acc, i) + Get(a, i) * s);
  }

  Ciphertext Rescale(const Ciphertext& a) const override {
    CheckOwned(a);
    if (a.level < 1) throw DepthExhausted("no modulus left to rescale into");
    Ciphertext out = DropToLevel(a, a.level - 1);
    out.scale = a.scale / RescaleFactor(a.level);
    return out;
  }

  Ciphertext DropToLevel(const Ciphertext& a, int level) const override {
    CheckOwned(a);
    Require(level >= 0 && level <= a.level, "can only drop to a lower level");
    Ciphertext out = a;
    out.level = level;
    out.limbs.resize(2 * LimbsPerPoly(level));
    return out;
  }

  Ciphertext RotateStep(const PublicMaterial& pub, const Ciphertext& a,
                        int step) const override {
    CheckOwned(a);
    if (pub.params_hash != hash_ || !pub.HasRotation(step)) {
      throw MissingRotationKey("no rotation key for step " + std::to_string(step));
    }
    Ciphertext out = a;
    const std::size_t n = slot_count();
    for (std::size_t i = 0; i < n; ++i) Set(out, i, Get(a, (i + static_cast<std::size_t>(step)) % n));
    return out;
  }

 protected:
  std::vector<double> DecryptImpl(const SecretKey& sk,
                                  const Ciphertext& ct) const override {
    Require(sk.key_id != 0 || sk.params_hash == hash_, "invalid secret key");
    return Slots(ct.limbs);
  }

 private:
  void CheckEncodable(std::span<const double> values, int level) const {
    Require(values.size() <= slot_count(), "more values than slots");
    Require(level >= 0 && level <= top_level(), "level out of range");
    for (double v : values) Require(std::isfinite(v), "values must be finite");
  }

  Ciphertext Fresh(int level) const {
    Ciphertext ct;
    ct.params_hash = hash_;
    ct.level = level;
    ct.scale = params_.scale();
    ct.limbs.assign(2 * LimbsPerPoly(level), 0);
    return ct;
  }

  std::vector<double> Slots(const std::vector<std::uint64_t>& limbs) const {
    std::vector<double> out(slot_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<double>(limbs[i]);
    return out;
  }
  static double Get(const Ciphertext& ct, std::size_t i) {
    return std::bit_cast<double>(ct.limbs[i]);
  }
  static void Set(Ciphertext& ct, std::size_t i, double v) {
    ct.limbs[i] = std::bit_cast<std::uint64_t>(v);
  }
};

}  // namespace

std::unique_ptr<Backend> MakeMockBackend(const EncryptionParams& params) {
  return std::make_unique<MockBackend>(params);
}

}  // namespace held::he::internal
