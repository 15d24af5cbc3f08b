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

// RNS-CKKS: canonical-embedding encoding, public-key encryption, exact-scale
// plaintext products with rescaling, and hybrid key switching with one
// special prime for slot rotations.

#include <cmath>
#include <complex>
#include <string>

#include "held/he_backend/rns.hpp"
#include "impl.hpp"

namespace held::he::internal {

namespace {

constexpr double kErrorSigma = 3.2;
using Complex = std::complex<double>;

class CkksBackend final : public Backend {
 public:
  explicit CkksBackend(const EncryptionParams& params);

  using Backend::MultiplyPlainNoRescale;

  std::string_view name() const override { return kCkksPreset; }

  KeyMaterial KeyGen(RandomSource& rng, const std::vector<int>& steps) const override;
  Plaintext Encode(std::span<const double> values, int level,
                   double scale) const override;
  std::vector<double> Decode(const Plaintext& pt) const override;
  Ciphertext Encrypt(const PublicMaterial& pub, std::span<const double> values,
                     RandomSource& rng) const override;
  Ciphertext Add(const Ciphertext& a, const Ciphertext& b) const override;
  Ciphertext AddPlain(const Ciphertext& a, std::span<const double> values) const override;
  Ciphertext MultiplyPlainNoRescale(const Ciphertext& a,
                                    const Plaintext& p) const override;
  Ciphertext MultiplyScalarNoRescale(const Ciphertext& a, double s) const override;
  void MultiplyScalarAccumulate(Ciphertext& acc, const Ciphertext& a,
                                double s) const override;
  Ciphertext Rescale(const Ciphertext& a) const override;
  Ciphertext DropToLevel(const Ciphertext& a, int level) const override;
  Ciphertext RotateStep(const PublicMaterial& pub, const Ciphertext& a,
                        int step) const override;

 protected:
  std::vector<double> DecryptImpl(const SecretKey& sk,
                                  const Ciphertext& ct) const override;

 private:
  std::size_t special() const { return primes_.size() - 1; }
  // round(s * q_level) as a signed integer.
  std::int64_t ScalarToInteger(const Ciphertext& a, double s) const;
  std::size_t key_primes() const { return primes_.size(); }

  // Signed coefficients to NTT-form residues for primes [0, count) and
  // optionally the special prime, appended in that order.
  void ToNtt(const std::vector<std::int64_t>& coeffs, std::size_t count,
             bool with_special, std::uint64_t* out) const;
  std::vector<std::int64_t> SampleGaussian(RandomSource& rng) const;
  std::vector<std::int64_t> SampleTernary(RandomSource& rng) const;

  void EmbedInverse(std::vector<Complex>& vals) const;
  void Embed(std::vector<Complex>& vals) const;
  // Coefficient-form residues (primes 0..level) to centered real values.
  std::vector<long double> ComposeCentered(const std::vector<std::uint64_t>& coeff,
                                           int level) const;
  std::vector<double> DecodeResidues(std::vector<std::uint64_t> ntt_residues,
                                     int level, double scale) const;
  // Centered residue mod q_from, reduced into prime `to`.
  std::uint64_t Lift(std::uint64_t v, std::size_t from, std::size_t to) const {
    const std::uint64_t qf = mods_[from].value();
    if (v > qf / 2) return mods_[to].Neg((qf - v) % mods_[to].value());
    return v % mods_[to].value();
  }
  std::vector<std::uint64_t> BuildSwitchingKey(const std::vector<std::uint64_t>& s,
                                               const std::vector<std::uint64_t>& s_from,
                                               RandomSource& rng) const;
  void KeySwitch(const std::uint64_t* d, int level,
                 const std::vector<std::uint64_t>& key, std::uint64_t* out0,
                 std::uint64_t* out1) const;

  std::size_t n_;
  std::vector<Modulus> mods_;
  std::vector<NttTables> ntt_;
  std::vector<std::vector<std::uint64_t>> garner_inv_;  // [i][k] = q_k^-1 mod q_i
  std::vector<std::vector<std::uint64_t>> rescale_inv_;  // [l][i] = q_l^-1 mod q_i
  std::vector<std::uint64_t> special_inv_;              // P^-1 mod q_i
  std::vector<std::uint64_t> special_mod_;              // P mod q_i
  std::vector<Complex> ksi_;
  std::vector<std::size_t> rot_group_;
  std::map<int, std::vector<std::uint32_t>> perms_;
};

CkksBackend::CkksBackend(const EncryptionParams& params)
    : Backend(params), n_(params.ring_degree) {
  for (auto q : primes_) {
    mods_.emplace_back(q);
    ntt_.emplace_back(n_, mods_.back());
  }
  const std::size_t data = primes_.size() - 1;
  garner_inv_.resize(data);
  rescale_inv_.resize(data);
  for (std::size_t i = 0; i < data; ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      garner_inv_[i].push_back(mods_[i].Inverse(primes_[k] % primes_[i]));
      rescale_inv_[i].push_back(mods_[k].Inverse(primes_[i] % primes_[k]));
    }
    special_mod_.push_back(primes_[special()] % primes_[i]);
    special_inv_.push_back(mods_[i].Inverse(special_mod_.back()));
  }
  const std::size_t m = 2 * n_;
  ksi_.resize(m + 1);
  for (std::size_t j = 0; j <= m; ++j) {
    const double angle = 2.0 * M_PI * static_cast<double>(j) / static_cast<double>(m);
    ksi_[j] = Complex(std::cos(angle), std::sin(angle));
  }
  rot_group_.resize(n_ / 2);
  std::size_t five = 1;
  for (auto& r : rot_group_) {
    r = five;
    five = five * 5 % m;
  }
  for (int step : PowerOfTwoSteps(slot_count())) {
    perms_[step] = GaloisNttPermutation(n_, rot_group_[static_cast<std::size_t>(step)]);
  }
}

void CkksBackend::ToNtt(const std::vector<std::int64_t>& coeffs, std::size_t count,
                        bool with_special, std::uint64_t* out) const {
  auto fill = [&](std::size_t prime, std::uint64_t* dst) {
    for (std::size_t k = 0; k < n_; ++k) dst[k] = mods_[prime].FromSigned(coeffs[k]);
    ntt_[prime].Forward(dst);
  };
  for (std::size_t i = 0; i < count; ++i) fill(i, out + i * n_);
  if (with_special) fill(special(), out + count * n_);
}

std::vector<std::int64_t> CkksBackend::SampleGaussian(RandomSource& rng) const {
  std::vector<std::int64_t> out(n_);
  for (auto& v : out) v = rng.DiscreteGaussian(kErrorSigma);
  return out;
}

std::vector<std::int64_t> CkksBackend::SampleTernary(RandomSource& rng) const {
  std::vector<std::int64_t> out(n_);
  for (auto& v : out) v = rng.Ternary();
  return out;
}

void CkksBackend::EmbedInverse(std::vector<Complex>& vals) const {
  const std::size_t size = vals.size();
  const std::size_t m = 2 * n_;
  for (std::size_t len = size; len >= 1; len >>= 1) {
    for (std::size_t i = 0; i < size; i += len) {
      const std::size_t lenh = len >> 1;
      const std::size_t lenq = len << 2;
      const std::size_t gap = m / lenq;
      for (std::size_t j = 0; j < lenh; ++j) {
        const std::size_t idx = (lenq - (rot_group_[j] % lenq)) * gap;
        const Complex u = vals[i + j] + vals[i + j + lenh];
        const Complex v = (vals[i + j] - vals[i + j + lenh]) * ksi_[idx];
        vals[i + j] = u;
        vals[i + j + lenh] = v;
      }
    }
  }
  int bits = 0;
  while ((std::size_t{1} << bits) < size) ++bits;
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t r = BitReverse(i, bits);
    if (i < r) std::swap(vals[i], vals[r]);
  }
  for (auto& v : vals) v /= static_cast<double>(size);
}

void CkksBackend::Embed(std::vector<Complex>& vals) const {
  const std::size_t size = vals.size();
  const std::size_t m = 2 * n_;
  int bits = 0;
  while ((std::size_t{1} << bits) < size) ++bits;
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t r = BitReverse(i, bits);
    if (i < r) std::swap(vals[i], vals[r]);
  }
  for (std::size_t len = 2; len <= size; len <<= 1) {
    const std::size_t lenh = len >> 1;
    const std::size_t lenq = len << 2;
    const std::size_t gap = m / lenq;
    for (std::size_t i = 0; i < size; i += len) {
      for (std::size_t j = 0; j < lenh; ++j) {
        const std::size_t idx = (rot_group_[j] % lenq) * gap;
        const Complex u = vals[i + j];
        const Complex v = vals[i + j + lenh] * ksi_[idx];
        vals[i + j] = u + v;
        vals[i + j + lenh] = u - v;
      }
    }
  }
}

Plaintext CkksBackend::Encode(std::span<const double> values, int level,
                              double scale) const {
  Require(values.size() <= slot_count(), "more values than slots");
  Require(level >= 0 && level <= top_level(), "level out of range");
  Require(std::isfinite(scale) && scale >= 1.0, "encoding scale must be >= 1");
  std::vector<Complex> vals(slot_count());
  for (std::size_t i = 0; i < values.size(); ++i) {
    Require(std::isfinite(values[i]), "values must be finite");
    vals[i] = values[i];
  }
  EmbedInverse(vals);
  int budget = 0;
  for (int i = 0; i <= level; ++i) budget += params_.modulus_bits[static_cast<std::size_t>(i)];
  const long double limit = std::ldexp(1.0L, budget - 2);
  const std::size_t half = n_ / 2;
  Plaintext pt;
  pt.params_hash = hash_;
  pt.level = level;
  pt.scale = scale;
  pt.length = values.size();
  pt.limbs.resize(static_cast<std::size_t>(level + 1) * n_);
  std::vector<long double> coeffs(n_);
  for (std::size_t i = 0; i < half; ++i) {
    coeffs[i] = std::round(static_cast<long double>(vals[i].real()) * scale);
    coeffs[i + half] = std::round(static_cast<long double>(vals[i].imag()) * scale);
  }
  for (auto c : coeffs) {
    if (!(std::fabs(c) < limit)) {
      throw InvalidArgument("encoded value exceeds the modulus budget at this level");
    }
  }
  for (int i = 0; i <= level; ++i) {
    const auto& mod = mods_[static_cast<std::size_t>(i)];
    const auto qd = static_cast<long double>(mod.value());
    std::uint64_t* dst = pt.limbs.data() + static_cast<std::size_t>(i) * n_;
    for (std::size_t k = 0; k < n_; ++k) {
      const long double c = coeffs[k];
      if (std::fabs(c) < 0x1p62L) {
        dst[k] = mod.FromSigned(static_cast<std::int64_t>(c));
      } else {
        long double r = std::fmod(c, qd);
        if (r < 0) r += qd;
        dst[k] = static_cast<std::uint64_t>(r) % mod.value();
      }
    }
    ntt_[static_cast<std::size_t>(i)].Forward(dst);
  }
  return pt;
}

std::vector<long double> CkksBackend::ComposeCentered(
    const std::vector<std::uint64_t>& coeff, int level) const {
  std::vector<long double> out(n_);
  const auto l = static_cast<std::size_t>(level);
  std::vector<std::uint64_t> digits(l + 1);
  for (std::size_t k = 0; k < n_; ++k) {
    for (std::size_t i = 0; i <= l; ++i) {
      std::uint64_t t = coeff[i * n_ + k];
      for (std::size_t j = 0; j < i; ++j) {
        t = mods_[i].Mul(mods_[i].Sub(t, digits[j] % primes_[i]), garner_inv_[i][j]);
      }
      digits[i] = t;
    }
    long double r = static_cast<long double>(digits[l]);
    if (digits[l] > primes_[l] / 2) r -= static_cast<long double>(primes_[l]);
    for (std::size_t i = l; i-- > 0;) {
      r = r * static_cast<long double>(primes_[i]) + static_cast<long double>(digits[i]);
    }
    out[k] = r;
  }
  return out;
}

std::vector<double> CkksBackend::DecodeResidues(std::vector<std::uint64_t> residues,
                                                int level, double scale) const {
  for (int i = 0; i <= level; ++i) {
    ntt_[static_cast<std::size_t>(i)].Inverse(residues.data() + static_cast<std::size_t>(i) * n_);
  }
  const auto coeffs = ComposeCentered(residues, level);
  const std::size_t half = n_ / 2;
  std::vector<Complex> vals(half);
  const long double s = scale;
  for (std::size_t i = 0; i < half; ++i) {
    vals[i] = Complex(static_cast<double>(coeffs[i] / s),
                      static_cast<double>(coeffs[i + half] / s));
  }
  Embed(vals);
  std::vector<double> out(half);
  for (std::size_t i = 0; i < half; ++i) out[i] = vals[i].real();
  return out;
}

std::vector<double> CkksBackend::Decode(const Plaintext& pt) const {
  Require(pt.params_hash == hash_, "plaintext belongs to different parameters");
  return DecodeResidues(pt.limbs, pt.level, pt.scale);
}

std::vector<std::uint64_t> CkksBackend::BuildSwitchingKey(
    const std::vector<std::uint64_t>& s, const std::vector<std::uint64_t>& s_from,
    RandomSource& rng) const {
  const std::size_t kp = key_primes();
  const std::size_t digits = static_cast<std::size_t>(top_level() + 1);
  std::vector<std::uint64_t> key(digits * 2 * kp * n_);
  std::vector<std::uint64_t> e(kp * n_);
  for (std::size_t j = 0; j < digits; ++j) {
    ToNtt(SampleGaussian(rng), kp - 1, true, e.data());
    for (std::size_t t = 0; t < kp; ++t) {
      const auto& mod = mods_[t];
      std::uint64_t* b = key.data() + ((j * 2 + 0) * kp + t) * n_;
      std::uint64_t* a = key.data() + ((j * 2 + 1) * kp + t) * n_;
      const std::uint64_t* st = s.data() + t * n_;
      const std::uint64_t* et = e.data() + t * n_;
      for (std::size_t k = 0; k < n_; ++k) {
        a[k] = rng.Uniform(mod.value());
        b[k] = mod.Add(mod.Neg(mod.Mul(a[k], st[k])), et[k]);
      }
      if (t == j) {
        const std::uint64_t* sf = s_from.data() + t * n_;
        for (std::size_t k = 0; k < n_; ++k) {
          b[k] = mod.Add(b[k], mod.Mul(special_mod_[t], sf[k]));
        }
      }
    }
  }
  return key;
}

KeyMaterial CkksBackend::KeyGen(RandomSource& rng, const std::vector<int>& steps) const {
  KeyMaterial keys;
  const std::size_t kp = key_primes();
  const std::size_t data = kp - 1;
  keys.secret.params_hash = hash_;
  keys.secret.key_id = rng.NextU64();
  keys.pub.params_hash = hash_;
  keys.pub.key_id = keys.secret.key_id;

  auto& s = keys.secret.limbs;
  s.resize(kp * n_);
  ToNtt(SampleTernary(rng), data, true, s.data());

  auto& pk = keys.pub.public_key;
  pk.resize(2 * data * n_);
  std::vector<std::uint64_t> e(data * n_);
  ToNtt(SampleGaussian(rng), data, false, e.data());
  for (std::size_t i = 0; i < data; ++i) {
    const auto& mod = mods_[i];
    std::uint64_t* b = pk.data() + i * n_;
    std::uint64_t* a = pk.data() + (data + i) * n_;
    for (std::size_t k = 0; k < n_; ++k) {
      a[k] = rng.Uniform(mod.value());
      b[k] = mod.Add(mod.Neg(mod.Mul(a[k], s[i * n_ + k])), e[i * n_ + k]);
    }
  }

  std::vector<std::uint64_t> s_rot(kp * n_);
  for (int step : steps) {
    const auto it = perms_.find(step);
    Require(it != perms_.end(),
            "rotation steps must be powers of two below the slot count");
    for (std::size_t t = 0; t < kp; ++t) {
      for (std::size_t k = 0; k < n_; ++k) s_rot[t * n_ + k] = s[t * n_ + it->second[k]];
    }
    keys.pub.galois_keys[step] = BuildSwitchingKey(s, s_rot, rng);
  }
  return keys;
}

Ciphertext CkksBackend::Encrypt(const PublicMaterial& pub, std::span<const double> values,
                                RandomSource& rng) const {
  Require(pub.params_hash == hash_ &&
              pub.public_key.size() == 2 * LimbsPerPoly(top_level()),
          "public key missing or for different parameters");
  const int level = top_level();
  const std::size_t count = static_cast<std::size_t>(level + 1);
  const Plaintext m = Encode(values, level, params_.scale());
  std::vector<std::uint64_t> u(count * n_), e0(count * n_), e1(count * n_);
  ToNtt(SampleTernary(rng), count, false, u.data());
  ToNtt(SampleGaussian(rng), count, false, e0.data());
  ToNtt(SampleGaussian(rng), count, false, e1.data());
  Ciphertext ct;
  ct.params_hash = hash_;
  ct.level = level;
  ct.scale = params_.scale();
  ct.limbs.resize(2 * count * n_);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& mod = mods_[i];
    const std::uint64_t* b = pub.public_key.data() + i * n_;
    const std::uint64_t* a = pub.public_key.data() + (count + i) * n_;
    std::uint64_t* c0 = ct.limbs.data() + i * n_;
    std::uint64_t* c1 = ct.limbs.data() + (count + i) * n_;
    for (std::size_t k = 0; k < n_; ++k) {
      const std::size_t x = i * n_ + k;
      c0[k] = mod.Add(mod.Add(mod.Mul(b[k], u[x]), e0[x]), m.limbs[x]);
      c1[k] = mod.Add(mod.Mul(a[k], u[x]), e1[x]);
    }
  }
  return ct;
}

std::vector<double> CkksBackend::DecryptImpl(const SecretKey& sk,
                                             const Ciphertext& ct) const {
  Require(sk.limbs.size() == key_primes() * n_, "secret key has the wrong size");
  const std::size_t count = static_cast<std::size_t>(ct.level + 1);
  std::vector<std::uint64_t> m(count * n_);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& mod = mods_[i];
    const std::uint64_t* c0 = ct.limbs.data() + i * n_;
    const std::uint64_t* c1 = ct.limbs.data() + (count + i) * n_;
    const std::uint64_t* s = sk.limbs.data() + i * n_;
    for (std::size_t k = 0; k < n_; ++k) m[i * n_ + k] = mod.Add(c0[k], mod.Mul(c1[k], s[k]));
  }
  return DecodeResidues(std::move(m), ct.level, ct.scale);
}

Ciphertext CkksBackend::DropToLevel(const Ciphertext& a, int level) const {
  CheckOwned(a);
  Require(level >= 0 && level <= a.level, "can only drop to a lower level");
  if (level == a.level) return a;
  Ciphertext out;
  out.params_hash = hash_;
  out.level = level;
  out.depth = a.depth;
  out.scale = a.scale;
  const std::size_t from = LimbsPerPoly(a.level), to = LimbsPerPoly(level);
  out.limbs.resize(2 * to);
  for (std::size_t p = 0; p < 2; ++p) {
    std::copy_n(a.limbs.begin() + static_cast<std::ptrdiff_t>(p * from), to,
                out.limbs.begin() + static_cast<std::ptrdiff_t>(p * to));
  }
  return out;
}

Ciphertext CkksBackend::Add(const Ciphertext& a, const Ciphertext& b) const {
  CheckOwned(a);
  CheckOwned(b);
  CheckScalesMatch(a.scale, b.scale);
  const int level = std::min(a.level, b.level);
  Ciphertext out = DropToLevel(a, level);
  const Ciphertext bb = DropToLevel(b, level);
  const std::size_t count = static_cast<std::size_t>(level + 1);
  for (std::size_t p = 0; p < 2; ++p) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto& mod = mods_[i];
      std::uint64_t* x = out.limbs.data() + (p * count + i) * n_;
      const std::uint64_t* y = bb.limbs.data() + (p * count + i) * n_;
      for (std::size_t k = 0; k < n_; ++k) x[k] = mod.Add(x[k], y[k]);
    }
  }
  out.depth = std::max(a.depth, b.depth);
  return out;
}

Ciphertext CkksBackend::AddPlain(const Ciphertext& a, std::span<const double> values) const {
  CheckOwned(a);
  const Plaintext p = Encode(values, a.level, a.scale);
  Ciphertext out = a;
  for (std::size_t i = 0; i <= static_cast<std::size_t>(a.level); ++i) {
    const auto& mod = mods_[i];
    std::uint64_t* x = out.limbs.data() + i * n_;
    const std::uint64_t* y = p.limbs.data() + i * n_;
    for (std::size_t k = 0; k < n_; ++k) x[k] = mod.Add(x[k], y[k]);
  }
  return out;
}

Ciphertext CkksBackend::MultiplyPlainNoRescale(const Ciphertext& a,
                                               const Plaintext& p) const {
  CheckOwned(a);
  CheckMultiplicable(a);
  Require(p.params_hash == hash_ && p.level == a.level,
          "plaintext level differs from ciphertext level");
  const std::size_t count = static_cast<std::size_t>(a.level + 1);
  Ciphertext out = a;
  for (std::size_t poly = 0; poly < 2; ++poly) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto& mod = mods_[i];
      std::uint64_t* x = out.limbs.data() + (poly * count + i) * n_;
      const std::uint64_t* y = p.limbs.data() + i * n_;
      for (std::size_t k = 0; k < n_; ++k) x[k] = mod.Mul(x[k], y[k]);
    }
  }
  out.scale = a.scale * p.scale;
  out.depth = a.depth + 1;
  return out;
}

std::int64_t CkksBackend::ScalarToInteger(const Ciphertext& a, double s) const {
  const double q = RescaleFactor(a.level);
  const long double scaled = std::round(static_cast<long double>(s) * q);
  Require(std::isfinite(s) && std::fabs(scaled) < 0x1p62L,
          "scalar too large for the current level");
  return static_cast<std::int64_t>(scaled);
}

Ciphertext CkksBackend::MultiplyScalarNoRescale(const Ciphertext& a, double s) const {
  CheckOwned(a);
  CheckMultiplicable(a);
  const std::int64_t v = ScalarToInteger(a, s);
  const std::size_t count = static_cast<std::size_t>(a.level + 1);
  Ciphertext out = a;
  for (std::size_t poly = 0; poly < 2; ++poly) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto& mod = mods_[i];
      const std::uint64_t r = mod.FromSigned(v);
      const std::uint64_t r_shoup = mod.ShoupFactor(r);
      std::uint64_t* x = out.limbs.data() + (poly * count + i) * n_;
      for (std::size_t k = 0; k < n_; ++k) x[k] = mod.MulShoup(x[k], r, r_shoup);
    }
  }
  out.scale = a.scale * RescaleFactor(a.level);
  out.depth = a.depth + 1;
  return out;
}

void CkksBackend::MultiplyScalarAccumulate(Ciphertext& acc, const Ciphertext& a,
                                           double s) const {
  CheckAccumulable(acc, a);
  const std::int64_t v = ScalarToInteger(a, s);
  const std::size_t count = static_cast<std::size_t>(a.level + 1);
  for (std::size_t poly = 0; poly < 2; ++poly) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto& mod = mods_[i];
      const std::uint64_t r = mod.FromSigned(v);
      const std::uint64_t r_shoup = mod.ShoupFactor(r);
      std::uint64_t* x = acc.limbs.data() + (poly * count + i) * n_;
      const std::uint64_t* y = a.limbs.data() + (poly * count + i) * n_;
      for (std::size_t k = 0; k < n_; ++k) x[k] = mod.Add(x[k], mod.MulShoup(y[k], r, r_shoup));
    }
  }
}

Ciphertext CkksBackend::Rescale(const Ciphertext& a) const {
  CheckOwned(a);
  if (a.level < 1) throw DepthExhausted("no modulus left to rescale into");
  const auto top = static_cast<std::size_t>(a.level);
  const std::size_t count = top + 1;
  Ciphertext out;
  out.params_hash = hash_;
  out.level = a.level - 1;
  out.depth = a.depth;
  out.scale = a.scale / static_cast<double>(primes_[top]);
  out.limbs.resize(2 * top * n_);
  std::vector<std::uint64_t> last(n_), tmp(n_);
  for (std::size_t poly = 0; poly < 2; ++poly) {
    std::copy_n(a.limbs.data() + (poly * count + top) * n_, n_, last.data());
    ntt_[top].Inverse(last.data());
    for (std::size_t i = 0; i < top; ++i) {
      const auto& mod = mods_[i];
      for (std::size_t k = 0; k < n_; ++k) tmp[k] = Lift(last[k], top, i);
      ntt_[i].Forward(tmp.data());
      const std::uint64_t inv = rescale_inv_[top][i];
      const std::uint64_t* x = a.limbs.data() + (poly * count + i) * n_;
      std::uint64_t* y = out.limbs.data() + (poly * top + i) * n_;
      for (std::size_t k = 0; k < n_; ++k) y[k] = mod.Mul(mod.Sub(x[k], tmp[k]), inv);
    }
  }
  return out;
}

void CkksBackend::KeySwitch(const std::uint64_t* d, int level,
                            const std::vector<std::uint64_t>& key,
                            std::uint64_t* out0, std::uint64_t* out1) const {
  const std::size_t count = static_cast<std::size_t>(level + 1);
  const std::size_t kp = key_primes();
  // Accumulators over primes 0..level followed by the special prime.
  std::vector<std::uint64_t> acc0((count + 1) * n_, 0), acc1((count + 1) * n_, 0);
  std::vector<std::uint64_t> coeff(n_), tmp(n_);
  for (std::size_t j = 0; j < count; ++j) {
    std::copy_n(d + j * n_, n_, coeff.data());
    ntt_[j].Inverse(coeff.data());
    for (std::size_t t = 0; t <= count; ++t) {
      const std::size_t prime = t == count ? special() : t;
      const auto& mod = mods_[prime];
      const std::uint64_t* digit;
      if (prime == j) {
        digit = d + j * n_;
      } else {
        for (std::size_t k = 0; k < n_; ++k) tmp[k] = Lift(coeff[k], j, prime);
        ntt_[prime].Forward(tmp.data());
        digit = tmp.data();
      }
      const std::uint64_t* kb = key.data() + ((j * 2 + 0) * kp + prime) * n_;
      const std::uint64_t* ka = key.data() + ((j * 2 + 1) * kp + prime) * n_;
      std::uint64_t* a0 = acc0.data() + t * n_;
      std::uint64_t* a1 = acc1.data() + t * n_;
      for (std::size_t k = 0; k < n_; ++k) {
        a0[k] = mod.Add(a0[k], mod.Mul(digit[k], kb[k]));
        a1[k] = mod.Add(a1[k], mod.Mul(digit[k], ka[k]));
      }
    }
  }
  // Divide by the special prime with rounding.
  for (int which = 0; which < 2; ++which) {
    auto& acc = which == 0 ? acc0 : acc1;
    std::uint64_t* out = which == 0 ? out0 : out1;
    std::uint64_t* sp = acc.data() + count * n_;
    ntt_[special()].Inverse(sp);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& mod = mods_[i];
      for (std::size_t k = 0; k < n_; ++k) tmp[k] = Lift(sp[k], special(), i);
      ntt_[i].Forward(tmp.data());
      const std::uint64_t* x = acc.data() + i * n_;
      std::uint64_t* y = out + i * n_;
      for (std::size_t k = 0; k < n_; ++k) y[k] = mod.Mul(mod.Sub(x[k], tmp[k]), special_inv_[i]);
    }
  }
}

Ciphertext CkksBackend::RotateStep(const PublicMaterial& pub, const Ciphertext& a,
                                   int step) const {
  CheckOwned(a);
  const auto key = pub.galois_keys.find(step);
  if (pub.params_hash != hash_ || key == pub.galois_keys.end()) {
    throw MissingRotationKey("no rotation key for step " + std::to_string(step));
  }
  Require(key->second.size() == GaloisKeyLimbs(), "Galois key has the wrong size");
  const auto& perm = perms_.at(step);
  const std::size_t count = static_cast<std::size_t>(a.level + 1);
  std::vector<std::uint64_t> rotated(a.limbs.size());
  for (std::size_t block = 0; block < 2 * count; ++block) {
    const std::uint64_t* src = a.limbs.data() + block * n_;
    std::uint64_t* dst = rotated.data() + block * n_;
    for (std::size_t k = 0; k < n_; ++k) dst[k] = src[perm[k]];
  }
  Ciphertext out;
  out.params_hash = hash_;
  out.level = a.level;
  out.depth = a.depth;
  out.scale = a.scale;
  out.limbs.resize(a.limbs.size());
  std::uint64_t* c0 = out.limbs.data();
  std::uint64_t* c1 = out.limbs.data() + count * n_;
  KeySwitch(rotated.data() + count * n_, a.level, key->second, c0, c1);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& mod = mods_[i];
    for (std::size_t k = 0; k < n_; ++k) {
      c0[i * n_ + k] = mod.Add(c0[i * n_ + k], rotated[i * n_ + k]);
    }
  }
  return out;
}

}  // namespace

std::unique_ptr<Backend> MakeCkksBackend(const EncryptionParams& params) {
  return std::make_unique<CkksBackend>(params);
}

}  // namespace held::he::internal
