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

#include "held/he_backend/backend.hpp"

#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "held/he_backend/rns.hpp"
#include "impl.hpp"

namespace held::he {

namespace {

thread_local Party current_party = Party::kNone;
std::array<std::atomic<std::int64_t>, 3> decrypt_counts{};

constexpr std::uint8_t kCiphertextVersion = 1;
constexpr std::uint8_t kKeyBlobVersion = 1;
constexpr std::uint8_t kPublicKeyBlob = 1;
constexpr std::uint8_t kGaloisKeyBlob = 2;
constexpr std::size_t kCiphertextHeader = 1 + 8 + 1 + 1 + 8;
constexpr std::size_t kKeyBlobHeader = 1 + 1 + 8 + 8 + 4;

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }
  void U8(std::uint8_t v) { out_.push_back(v); }
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void F64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    U64(bits);
  }
  void Limbs(const std::vector<std::uint64_t>& limbs) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto* p = reinterpret_cast<const std::uint8_t*>(limbs.data());
      out_.insert(out_.end(), p, p + limbs.size() * 8);
    } else {
      for (auto v : limbs) U64(v);
    }
  }
  std::vector<std::uint8_t> Take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t U8() { return Need(1), in_[pos_++]; }
  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | in_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 4;
    return v;
  }
  std::uint64_t U64() {
    Need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | in_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 8;
    return v;
  }
  double F64() {
    const std::uint64_t bits = U64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::vector<std::uint64_t> Limbs(std::size_t count) {
    Need(count * 8);
    std::vector<std::uint64_t> out(count);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), in_.data() + pos_, count * 8);
      pos_ += count * 8;
    } else {
      for (auto& v : out) v = U64();
    }
    return out;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void Need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("truncated HE blob");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

ScopedParty::ScopedParty(Party party) : previous_(current_party) {
  current_party = party;
}
ScopedParty::~ScopedParty() { current_party = previous_; }

Party CurrentParty() { return current_party; }

std::int64_t DecryptCount(Party party) {
  return decrypt_counts[static_cast<std::size_t>(party)].load();
}

void ResetDecryptCounts() {
  for (auto& c : decrypt_counts) c.store(0);
}

std::vector<int> PowerOfTwoSteps(std::size_t slot_count) {
  std::vector<int> steps;
  for (std::size_t s = 1; s < slot_count; s <<= 1) steps.push_back(static_cast<int>(s));
  return steps;
}

KeyMaterial Backend::KeyGen(RandomSource& rng) const {
  return KeyGen(rng, PowerOfTwoSteps(slot_count()));
}

Backend::Backend(EncryptionParams params) : params_(std::move(params)) {
  params_.Validate();
  hash_ = params_.Hash();
  primes_ = GenerateNttPrimes(params_.modulus_bits, params_.ring_degree);
}

double Backend::RescaleFactor(int level) const {
  Require(level >= 0 && level <= top_level(), "level out of range");
  return static_cast<double>(primes_[static_cast<std::size_t>(level)]);
}

std::vector<double> Backend::Decrypt(const SecretKey& sk,
                                     const Ciphertext& ct) const {
  decrypt_counts[static_cast<std::size_t>(current_party)].fetch_add(1);
  Require(sk.params_hash == hash_, "secret key belongs to different parameters");
  CheckOwned(ct);
  return DecryptImpl(sk, ct);
}

Ciphertext Backend::MultiplyPlainNoRescale(const Ciphertext& a,
                                           std::span<const double> values) const {
  CheckOwned(a);
  CheckMultiplicable(a);
  return MultiplyPlainNoRescale(a, Encode(values, a.level, RescaleFactor(a.level)));
}

void Backend::MultiplyScalarAccumulate(Ciphertext& acc, const Ciphertext& a,
                                       double s) const {
  acc = Add(acc, MultiplyScalarNoRescale(a, s));
}

void Backend::CheckAccumulable(const Ciphertext& acc, const Ciphertext& a) const {
  CheckOwned(acc);
  CheckOwned(a);
  CheckMultiplicable(a);
  Require(acc.level == a.level && acc.depth == a.depth + 1,
          "accumulator must hold scalar products at the operand's level");
  CheckScalesMatch(acc.scale, a.scale * RescaleFactor(a.level));
}

Ciphertext Backend::MulPlain(const Ciphertext& a,
                             std::span<const double> values) const {
  return Rescale(MultiplyPlainNoRescale(a, values));
}

Ciphertext Backend::Rotate(const PublicMaterial& pub, const Ciphertext& a,
                           int k) const {
  const auto slots = static_cast<long long>(slot_count());
  long long shift = k % slots;
  if (shift < 0) shift += slots;
  Ciphertext out = a;
  for (long long step = 1; step < slots; step <<= 1) {
    if (shift & step) out = RotateStep(pub, out, static_cast<int>(step));
  }
  return out;
}

void Backend::CheckOwned(const Ciphertext& ct) const {
  Require(ct.params_hash == hash_, "ciphertext belongs to different parameters");
  Require(ct.level >= 0 && ct.level <= top_level(), "ciphertext level out of range");
  Require(ct.limbs.size() == 2 * LimbsPerPoly(ct.level),
          "ciphertext limb count does not match its level");
  Require(std::isfinite(ct.scale) && ct.scale > 0.0, "ciphertext scale invalid");
}

void Backend::CheckMultiplicable(const Ciphertext& ct) const {
  if (ct.depth >= params_.max_depth) {
    throw DepthExhausted("multiplicative depth budget of " +
                         std::to_string(params_.max_depth) + " exhausted");
  }
  if (ct.level < 1) throw DepthExhausted("no modulus left to rescale into");
}

void Backend::CheckScalesMatch(double a, double b) const {
  Require(std::abs(a - b) <= 1e-9 * std::max(a, b),
          "operand scales differ; rescale first");
}

std::size_t Backend::CiphertextBytes(int level) const {
  return kCiphertextHeader + 2 * LimbsPerPoly(level) * 8;
}

std::size_t Backend::GaloisKeyLimbs() const {
  const auto digits = static_cast<std::size_t>(top_level() + 1);
  return digits * 2 * primes_.size() * ring_degree();
}

std::vector<std::uint8_t> Backend::Serialize(const Ciphertext& ct) const {
  CheckOwned(ct);
  Writer w(CiphertextBytes(ct.level));
  w.U8(kCiphertextVersion);
  w.U64(ct.params_hash);
  w.U8(static_cast<std::uint8_t>(ct.level));
  w.U8(static_cast<std::uint8_t>(ct.depth));
  w.F64(ct.scale);
  w.Limbs(ct.limbs);
  return w.Take();
}

Ciphertext Backend::Deserialize(std::span<const std::uint8_t> bytes) const {
  Reader r(bytes);
  if (r.U8() != kCiphertextVersion) throw FormatError("unknown ciphertext version");
  Ciphertext ct;
  ct.params_hash = r.U64();
  if (ct.params_hash != hash_) throw FormatError("ciphertext parameter hash mismatch");
  ct.level = r.U8();
  ct.depth = r.U8();
  ct.scale = r.F64();
  if (ct.level > top_level()) throw FormatError("ciphertext level out of range");
  if (!(std::isfinite(ct.scale) && ct.scale > 0.0)) {
    throw FormatError("ciphertext scale invalid");
  }
  if (r.remaining() != 2 * LimbsPerPoly(ct.level) * 8) {
    throw FormatError("ciphertext length does not match its level");
  }
  ct.limbs = r.Limbs(2 * LimbsPerPoly(ct.level));
  return ct;
}

std::vector<std::uint8_t> Backend::SerializePublicKey(const PublicMaterial& pub) const {
  Require(pub.params_hash == hash_, "public key belongs to different parameters");
  Require(pub.public_key.size() == 2 * LimbsPerPoly(top_level()),
          "public key has the wrong size");
  Writer w(kKeyBlobHeader + pub.public_key.size() * 8);
  w.U8(kKeyBlobVersion);
  w.U8(kPublicKeyBlob);
  w.U64(pub.params_hash);
  w.U64(pub.key_id);
  w.U32(1);
  w.Limbs(pub.public_key);
  return w.Take();
}

std::vector<std::uint8_t> Backend::SerializeGaloisKeys(const PublicMaterial& pub) const {
  Require(pub.params_hash == hash_, "Galois keys belong to different parameters");
  Writer w(kKeyBlobHeader + pub.galois_keys.size() * (4 + GaloisKeyLimbs() * 8));
  w.U8(kKeyBlobVersion);
  w.U8(kGaloisKeyBlob);
  w.U64(pub.params_hash);
  w.U64(pub.key_id);
  w.U32(static_cast<std::uint32_t>(pub.galois_keys.size()));
  for (const auto& [step, key] : pub.galois_keys) {
    Require(key.size() == GaloisKeyLimbs(), "Galois key has the wrong size");
    w.U32(static_cast<std::uint32_t>(step));
    w.Limbs(key);
  }
  return w.Take();
}

void Backend::DeserializeKeyBlob(std::span<const std::uint8_t> bytes,
                                 PublicMaterial& pub) const {
  Reader r(bytes);
  if (r.U8() != kKeyBlobVersion) throw FormatError("unknown key blob version");
  const std::uint8_t kind = r.U8();
  const std::uint64_t hash = r.U64();
  if (hash != hash_) throw FormatError("key blob parameter hash mismatch");
  const std::uint64_t key_id = r.U64();
  if (pub.params_hash != 0 && pub.key_id != key_id) {
    throw FormatError("key blob belongs to a different key set");
  }
  pub.params_hash = hash;
  pub.key_id = key_id;
  const std::uint32_t count = r.U32();
  if (kind == kPublicKeyBlob) {
    if (count != 1) throw FormatError("public key blob must hold one key");
    pub.public_key = r.Limbs(2 * LimbsPerPoly(top_level()));
  } else if (kind == kGaloisKeyBlob) {
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto step = static_cast<int>(r.U32());
      if (step <= 0 || static_cast<std::size_t>(step) >= slot_count() ||
          (step & (step - 1)) != 0) {
        throw FormatError("Galois key step must be a power of two below the slot count");
      }
      pub.galois_keys[step] = r.Limbs(GaloisKeyLimbs());
    }
  } else {
    throw FormatError("unknown key blob kind");
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in key blob");
}

std::unique_ptr<Backend> MakeBackend(const EncryptionParams& params) {
  if (params.security == SecurityLevel::kMock) return internal::MakeMockBackend(params);
  return internal::MakeCkksBackend(params);
}

std::unique_ptr<Backend> MakeBackend(std::string_view preset) {
  return MakeBackend(ParamsFromPreset(preset));
}

}  // namespace held::he
