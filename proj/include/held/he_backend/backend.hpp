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

#ifndef HELD_HE_BACKEND_BACKEND_HPP_
#define HELD_HE_BACKEND_BACKEND_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "held/common/error.hpp"
#include "held/he_backend/params.hpp"
#include "held/he_backend/random.hpp"

namespace held::he {

class DepthExhausted : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class MissingRotationKey : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Residues are stored in NTT form, polynomial-major then prime-major:
// limbs[(poly * (level + 1) + prime) * N + coeff]. The mock backend keeps
// its slot values bit-cast into the leading limbs so sizes agree.
struct Ciphertext {
  std::uint64_t params_hash = 0;
  int level = 0;
  int depth = 0;
  double scale = 1.0;
  std::vector<std::uint64_t> limbs;
};

struct Plaintext {
  std::uint64_t params_hash = 0;
  int level = 0;
  double scale = 1.0;
  std::size_t length = 0;  // values supplied before zero padding
  std::vector<std::uint64_t> limbs;
};

struct SecretKey {
  std::uint64_t params_hash = 0;
  std::uint64_t key_id = 0;
  std::vector<std::uint64_t> limbs;  // s over every prime incl. the special one
};

// What may leave the key owner: no secret-key member by construction.
struct PublicMaterial {
  std::uint64_t params_hash = 0;
  std::uint64_t key_id = 0;
  std::vector<std::uint64_t> public_key;
  // Keyed by the slot shift (a power of two).
  std::map<int, std::vector<std::uint64_t>> galois_keys;

  bool HasRotation(int step) const { return galois_keys.count(step) > 0; }
};

struct KeyMaterial {
  SecretKey secret;
  PublicMaterial pub;
};

// Which party the calling thread acts for; decrypt calls are tallied per
// party so audits can check who decrypted.
enum class Party { kNone = 0, kA = 1, kB = 2 };

class ScopedParty {
 public:
  explicit ScopedParty(Party party);
  ~ScopedParty();
  ScopedParty(const ScopedParty&) = delete;
  ScopedParty& operator=(const ScopedParty&) = delete;

 private:
  Party previous_;
};

Party CurrentParty();
std::int64_t DecryptCount(Party party);
void ResetDecryptCounts();

// Power-of-two shifts 1, 2, 4, ..., slots / 2.
std::vector<int> PowerOfTwoSteps(std::size_t slot_count);

class Backend {
 public:
  explicit Backend(EncryptionParams params);
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  virtual std::string_view name() const = 0;
  const EncryptionParams& params() const { return params_; }
  std::size_t slot_count() const { return params_.slot_count(); }
  std::size_t ring_degree() const { return params_.ring_degree; }
  int top_level() const { return params_.top_level(); }
  std::uint64_t params_hash() const { return hash_; }
  // Data primes followed by the special prime.
  const std::vector<std::uint64_t>& primes() const { return primes_; }
  // Scale used for plaintext operands at `level`, so that the following
  // rescale restores the ciphertext scale exactly.
  double RescaleFactor(int level) const;

  // Galois keys for exactly `steps` (powers of two); may be empty.
  virtual KeyMaterial KeyGen(RandomSource& rng,
                             const std::vector<int>& steps) const = 0;
  // Galois keys for every power-of-two shift.
  KeyMaterial KeyGen(RandomSource& rng) const;

  virtual Plaintext Encode(std::span<const double> values, int level,
                           double scale) const = 0;
  // All slots.
  virtual std::vector<double> Decode(const Plaintext& pt) const = 0;

  // Fresh ciphertext at the top level and the default scale.
  virtual Ciphertext Encrypt(const PublicMaterial& pub,
                             std::span<const double> values,
                             RandomSource& rng) const = 0;
  // All slots. Counted against the calling thread's party.
  std::vector<double> Decrypt(const SecretKey& sk, const Ciphertext& ct) const;

  // Operands one level apart are aligned by dropping primes.
  virtual Ciphertext Add(const Ciphertext& a, const Ciphertext& b) const = 0;
  virtual Ciphertext AddPlain(const Ciphertext& a,
                              std::span<const double> values) const = 0;
  // Product without rescaling; consumes one unit of the depth budget.
  virtual Ciphertext MultiplyPlainNoRescale(const Ciphertext& a,
                                            const Plaintext& p) const = 0;
  // Scalar product by round(s * q_level), no rescale.
  virtual Ciphertext MultiplyScalarNoRescale(const Ciphertext& a,
                                             double s) const = 0;
  // acc += s * a in place, where acc holds earlier scalar products of
  // ciphertexts at a's level and depth.
  virtual void MultiplyScalarAccumulate(Ciphertext& acc, const Ciphertext& a,
                                        double s) const;
  virtual Ciphertext Rescale(const Ciphertext& a) const = 0;
  virtual Ciphertext DropToLevel(const Ciphertext& a, int level) const = 0;
  // Cyclic left shift by a power-of-two step with its Galois key.
  virtual Ciphertext RotateStep(const PublicMaterial& pub, const Ciphertext& a,
                                int step) const = 0;

  Ciphertext MultiplyPlainNoRescale(const Ciphertext& a,
                                    std::span<const double> values) const;
  // Slotwise product followed by one rescale.
  Ciphertext MulPlain(const Ciphertext& a, std::span<const double> values) const;
  // Cyclic left shift by any k, composed from power-of-two steps.
  Ciphertext Rotate(const PublicMaterial& pub, const Ciphertext& a, int k) const;

  std::vector<std::uint8_t> Serialize(const Ciphertext& ct) const;
  Ciphertext Deserialize(std::span<const std::uint8_t> bytes) const;
  // Exact serialized length at `level`.
  std::size_t CiphertextBytes(int level) const;
  std::size_t ByteSize(const Ciphertext& ct) const { return CiphertextBytes(ct.level); }

  std::vector<std::uint8_t> SerializePublicKey(const PublicMaterial& pub) const;
  std::vector<std::uint8_t> SerializeGaloisKeys(const PublicMaterial& pub) const;
  // Fills the public key or Galois keys of `pub` from a blob.
  void DeserializeKeyBlob(std::span<const std::uint8_t> bytes,
                          PublicMaterial& pub) const;

 protected:
  virtual std::vector<double> DecryptImpl(const SecretKey& sk,
                                          const Ciphertext& ct) const = 0;

  std::size_t LimbsPerPoly(int level) const {
    return static_cast<std::size_t>(level + 1) * ring_degree();
  }
  std::size_t GaloisKeyLimbs() const;
  void CheckOwned(const Ciphertext& ct) const;
  void CheckMultiplicable(const Ciphertext& ct) const;
  void CheckScalesMatch(double a, double b) const;
  void CheckAccumulable(const Ciphertext& acc, const Ciphertext& a) const;

  EncryptionParams params_;
  std::uint64_t hash_;
  std::vector<std::uint64_t> primes_;
};

std::unique_ptr<Backend> MakeBackend(const EncryptionParams& params);
std::unique_ptr<Backend> MakeBackend(std::string_view preset);

}  // namespace held::he

#endif  // HELD_HE_BACKEND_BACKEND_HPP_
