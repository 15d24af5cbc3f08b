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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "doctest.h"
#include "held/classifier_ood/classifier.hpp"
#include "held/he_backend/backend.hpp"
#include "held/he_backend/linear.hpp"
#include "held/he_backend/rns.hpp"
#include "held/tensor_store/synthetic.hpp"

namespace he = held::he;
using held::Matrix;
using held::Vector;

namespace {

// Backends and keys are expensive; build once per process.
struct Fixture {
  std::unique_ptr<he::Backend> real = he::MakeBackend("ckks-8192-depth1");
  std::unique_ptr<he::Backend> mock = he::MakeBackend("mock");
  he::KeyMaterial real_keys;
  he::KeyMaterial mock_keys;
  Fixture() {
    he::SeededRandom r1(1), r2(1);
    real_keys = real->KeyGen(r1);
    mock_keys = mock->KeyGen(r2);
  }
};

Fixture& F() {
  static Fixture f;
  return f;
}

std::vector<double> RandomValues(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double MaxAbsDiff(const std::vector<double>& got, const std::vector<double>& want) {
  double worst = 0;
  for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  return worst;
}

// |got - want| <= tol * max(1, |want|) for each of the first want.size() slots.
bool WithinRelative(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (std::abs(got[i] - want[i]) > tol * std::max(1.0, std::abs(want[i]))) return false;
  }
  return true;
}

// Negacyclic schoolbook product mod q.
std::vector<std::uint64_t> Schoolbook(const std::vector<std::uint64_t>& a,
                                      const std::vector<std::uint64_t>& b,
                                      const he::Modulus& q) {
  const std::size_t n = a.size();
  std::vector<std::uint64_t> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint64_t p = q.Mul(a[i], b[j]);
      const std::size_t k = (i + j) % n;
      out[k] = i + j < n ? q.Add(out[k], p) : q.Sub(out[k], p);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("Barrett reduction agrees with 128-bit remainder") {
  std::mt19937_64 rng(3);
  for (std::uint64_t q : {std::uint64_t{3}, std::uint64_t{65537}, std::uint64_t{1152921504606584833ULL},
                          std::uint64_t{(1ULL << 61) - 1}}) {
    he::Modulus m(q);
    for (int i = 0; i < 20000; ++i) {
      const he::u128 x = (static_cast<he::u128>(rng()) << 64) | rng();
      CHECK(m.Reduce(x) == static_cast<std::uint64_t>(x % q));
      const std::uint64_t a = rng() % q, b = rng() % q;
      CHECK(m.Mul(a, b) == static_cast<std::uint64_t>(static_cast<he::u128>(a) * b % q));
      CHECK(m.MulShoup(a, b, m.ShoupFactor(b)) == m.Mul(a, b));
    }
    CHECK(m.Mul(m.Inverse(12345 % q == 0 ? 2 : 12345), 12345 % q == 0 ? 2 : 12345) == 1);
  }
}

TEST_CASE("primality and NTT-friendly prime generation") {
  for (std::uint64_t n = 0; n < 2000; ++n) {
    bool trial = n >= 2;
    for (std::uint64_t d = 2; d * d <= n; ++d) {
      if (n % d == 0) {
        trial = false;
        break;
      }
    }
    CHECK(he::IsPrime(n) == trial);
  }
  CHECK(he::IsPrime((1ULL << 61) - 1));
  CHECK(!he::IsPrime(3215031751ULL));  // strong pseudoprime to bases 2, 3, 5, 7
  const auto primes = he::GenerateNttPrimes({60, 40, 40, 60}, 8192);
  REQUIRE(primes.size() == 4);
  for (std::size_t i = 0; i < primes.size(); ++i) {
    CHECK(he::IsPrime(primes[i]));
    CHECK(primes[i] % 16384 == 1);
    CHECK(static_cast<int>(std::log2(static_cast<double>(primes[i]))) + 1 ==
          std::vector<int>{60, 40, 40, 60}[i]);
  }
  CHECK(primes[1] != primes[2]);
  CHECK(primes[0] != primes[3]);
}

TEST_CASE("negacyclic NTT evaluates, inverts and multiplies") {
  const auto q = he::GenerateNttPrimes({40}, 16)[0];
  he::Modulus mod(q);
  he::NttTables ntt(16, mod);
  CHECK(mod.Pow(ntt.psi(), 16) == q - 1);
  std::mt19937_64 rng(4);
  std::vector<std::uint64_t> a(16);
  for (auto& x : a) x = rng() % q;
  auto hat = a;
  ntt.Forward(hat.data());
  for (std::size_t k = 0; k < 16; ++k) {
    const std::uint64_t point = mod.Pow(ntt.psi(), 2 * he::BitReverse(k, 4) + 1);
    std::uint64_t eval = 0;
    for (std::size_t i = 16; i-- > 0;) eval = mod.Add(mod.Mul(eval, point), a[i]);
    CHECK(hat[k] == eval);
  }
  ntt.Inverse(hat.data());
  CHECK(hat == a);

  const auto q2 = he::GenerateNttPrimes({50}, 64)[0];
  he::Modulus m2(q2);
  he::NttTables t2(64, m2);
  std::vector<std::uint64_t> x(64), y(64);
  for (auto& v : x) v = rng() % q2;
  for (auto& v : y) v = rng() % q2;
  auto xh = x, yh = y;
  t2.Forward(xh.data());
  t2.Forward(yh.data());
  for (std::size_t k = 0; k < 64; ++k) xh[k] = m2.Mul(xh[k], yh[k]);
  t2.Inverse(xh.data());
  CHECK(xh == Schoolbook(x, y, m2));
}

TEST_CASE("Galois permutation in NTT form equals the coefficient automorphism") {
  const std::size_t n = 32;
  const auto q = he::GenerateNttPrimes({45}, n)[0];
  he::Modulus mod(q);
  he::NttTables ntt(n, mod);
  std::mt19937_64 rng(5);
  std::vector<std::uint64_t> a(n);
  for (auto& x : a) x = rng() % q;
  for (std::uint64_t g : {5ULL, 25ULL, 125ULL % 64, 63ULL}) {
    std::vector<std::uint64_t> direct(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t e = i * g % (2 * n);
      direct[e % n] = e < n ? a[i] : mod.Neg(a[i]);
    }
    auto hat = a;
    ntt.Forward(hat.data());
    const auto perm = he::GaloisNttPermutation(n, g);
    std::vector<std::uint64_t> moved(n);
    for (std::size_t k = 0; k < n; ++k) moved[k] = hat[perm[k]];
    ntt.Inverse(moved.data());
    CHECK(moved == direct);
  }
}

TEST_CASE("parameter presets and validation") {
  const auto real = he::ParamsFromPreset("ckks-8192-depth1");
  const auto mock = he::ParamsFromPreset("mock");
  CHECK(real.slot_count() == 4096);
  CHECK(real.top_level() == 2);
  CHECK(real.scale() == std::ldexp(1.0, 40));
  CHECK(real.total_bits() <= he::MaxModulusBits128(8192));
  CHECK(real.Hash() != mock.Hash());
  CHECK(real.Hash() == he::ParamsFromPreset("ckks-8192-depth1").Hash());
  CHECK_THROWS_AS(he::ParamsFromPreset("bfv"), held::InvalidArgument);
  auto bad = real;
  bad.ring_degree = 8000;
  CHECK_THROWS_AS(bad.Validate(), held::InvalidArgument);
  bad = real;
  bad.ring_degree = 4096;  // 200 bits exceed the 4096 budget
  CHECK_THROWS_AS(bad.Validate(), held::InvalidArgument);
  bad = real;
  bad.modulus_bits = {60, 60};
  CHECK_THROWS_AS(bad.Validate(), held::InvalidArgument);
  bad = real;
  bad.max_depth = 3;
  CHECK_THROWS_AS(bad.Validate(), held::InvalidArgument);
}

TEST_CASE("random sources") {
  he::SeededRandom a(9), b(9), c(9, 1), d(10);
  const auto xa = a.NextU64();
  CHECK(xa == b.NextU64());
  CHECK(xa != c.NextU64());
  CHECK(xa != d.NextU64());
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto g = static_cast<double>(a.DiscreteGaussian(3.2));
    sum += g;
    sq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.05);
  // rounding adds variance 1/12
  CHECK(std::abs(std::sqrt(sq / n) - std::sqrt(3.2 * 3.2 + 1.0 / 12)) < 0.05);
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 30000; ++i) ++counts[a.Ternary() + 1];
  for (int k : counts) CHECK(std::abs(k - 10000) < 600);
  he::SystemRandom sys;
  CHECK(sys.NextU64() != sys.NextU64());
}

TEST_CASE("keygen determinism and distinct seeds") {
  auto& f = F();
  he::SeededRandom again(1);
  const auto keys = f.real->KeyGen(again, {1, 2});
  CHECK(f.real->SerializePublicKey(keys.pub) == f.real->SerializePublicKey(f.real_keys.pub));
  he::SeededRandom twice(1);
  const auto keys2 = f.real->KeyGen(twice, {1, 2});
  CHECK(f.real->SerializeGaloisKeys(keys.pub) == f.real->SerializeGaloisKeys(keys2.pub));

  he::SeededRandom other(2);
  const auto keys3 = f.real->KeyGen(other, {1});
  CHECK(keys3.pub.public_key != keys.pub.public_key);
  CHECK(keys3.pub.key_id != keys.pub.key_id);
  he::SeededRandom enc(3);
  const auto v = RandomValues(64, -1, 1, 6);
  for (const auto* k : {&keys, &keys3}) {
    const auto back = f.real->Decrypt(k->secret, f.real->Encrypt(k->pub, v, enc));
    CHECK(MaxAbsDiff(back, v) <= 1e-6);
  }

  he::SeededRandom m(1);
  const auto mk = f.mock->KeyGen(m);
  const auto x = f.mock->Decrypt(mk.secret, f.mock->Encrypt(mk.pub, v, m));
  CHECK(std::equal(v.begin(), v.end(), x.begin()));
}

TEST_CASE("encode and decode precision") {
  auto& f = F();
  const auto& be = *f.real;
  const double scale = be.params().scale();
  const std::vector<double> zeros(be.slot_count(), 0.0);
  CHECK(MaxAbsDiff(be.Decode(be.Encode(zeros, 2, scale)), zeros) <= std::ldexp(1.0, -30));

  std::vector<double> fixed = {1.0, -1.0, 0.5, -0.5, 0.25, 0.0, 0.75, -0.125};
  CHECK(MaxAbsDiff(be.Decode(be.Encode(fixed, 2, scale)), fixed) <= 1e-6);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto v = RandomValues(8, -1, 1, 100 + static_cast<std::uint64_t>(trial));
    const auto back = be.Decode(be.Encode(v, trial % 3, scale));
    worst = std::max(worst, MaxAbsDiff(back, v));
    for (std::size_t i = 8; i < 16; ++i) worst = std::max(worst, std::abs(back[i]));
  }
  CHECK(worst <= 1e-6);
  const auto big = RandomValues(be.slot_count(), -1000, 1000, 7);
  CHECK(MaxAbsDiff(be.Decode(be.Encode(big, 1, scale)), big) <= std::ldexp(1.0, -20) * 1000);

  CHECK_THROWS_AS(be.Encode(std::vector<double>(be.slot_count() + 1, 0.0), 2, scale),
                  held::InvalidArgument);
  CHECK_THROWS_AS(be.Encode(std::vector<double>{1e30}, 0, scale), held::InvalidArgument);
  CHECK_THROWS_AS(f.mock->Encode(std::vector<double>(be.slot_count() + 1, 0.0), 2, scale),
                  held::InvalidArgument);
}

TEST_CASE("encryption round trip and randomization") {
  auto& f = F();
  he::SeededRandom rng(11);
  const auto v = RandomValues(f.real->slot_count(), -100, 100, 8);
  const auto ct = f.real->Encrypt(f.real_keys.pub, v, rng);
  CHECK(ct.level == 2);
  CHECK(ct.depth == 0);
  CHECK(WithinRelative(f.real->Decrypt(f.real_keys.secret, ct), v, 1e-3));
  const auto ct2 = f.real->Encrypt(f.real_keys.pub, v, rng);
  CHECK(f.real->Serialize(ct) != f.real->Serialize(ct2));

  const auto mct = f.mock->Encrypt(f.mock_keys.pub, v, rng);
  const auto mv = f.mock->Decrypt(f.mock_keys.secret, mct);
  CHECK(std::equal(v.begin(), v.end(), mv.begin()));
  CHECK_THROWS_AS(f.real->Encrypt(f.mock_keys.pub, v, rng), held::InvalidArgument);
}

TEST_CASE("slotwise homomorphisms") {
  auto& f = F();
  for (auto* be : {f.real.get(), f.mock.get()}) {
    const auto& keys = be == f.real.get() ? f.real_keys : f.mock_keys;
    const double tol = be == f.real.get() ? 1e-3 : 0.0;
    he::SeededRandom rng(12);
    const auto u = RandomValues(16, -10, 10, 13);
    const auto p = RandomValues(16, -10, 10, 14);
    const auto ct = be->Encrypt(keys.pub, u, rng);

    CHECK(WithinRelative(be->Decrypt(keys.secret, be->AddPlain(ct, std::vector<double>(16, 0.0))), u, tol));
    CHECK(WithinRelative(be->Decrypt(keys.secret, be->MulPlain(ct, std::vector<double>(16, 1.0))), u, tol));

    std::vector<double> prod(16), sum(16);
    for (int i = 0; i < 16; ++i) {
      prod[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(i)];
      sum[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)] + p[static_cast<std::size_t>(i)];
    }
    const auto mp = be->MulPlain(ct, p);
    CHECK(mp.level == 1);
    CHECK(mp.depth == 1);
    CHECK(mp.scale == be->params().scale());
    CHECK(WithinRelative(be->Decrypt(keys.secret, mp), prod, tol));
    const auto ctp = be->Encrypt(keys.pub, p, rng);
    CHECK(WithinRelative(be->Decrypt(keys.secret, be->Add(ct, ctp)), sum, tol));
    // one level apart: aligned by dropping a prime
    const auto mixed = be->Add(mp, ctp);
    CHECK(mixed.level == 1);
    std::vector<double> want(16);
    for (std::size_t i = 0; i < 16; ++i) want[i] = prod[i] + p[i];
    CHECK(WithinRelative(be->Decrypt(keys.secret, mixed), want, tol));

    const auto full = RandomValues(be->slot_count(), -5, 5, 15);
    const auto fct = be->Encrypt(keys.pub, full, rng);
    for (int k : {1, 2, 3, 7, 64, 1000, 4095, -1, -5}) {
      const auto rot = be->Decrypt(keys.secret, be->Rotate(keys.pub, fct, k));
      std::vector<double> shifted(be->slot_count());
      const auto slots = static_cast<long>(be->slot_count());
      for (long i = 0; i < slots; ++i) {
        shifted[static_cast<std::size_t>(i)] = full[static_cast<std::size_t>(((i + k) % slots + slots) % slots)];
      }
      CHECK(WithinRelative(rot, shifted, tol));
    }
  }
}

TEST_CASE("inner products") {
  auto& f = F();
  const auto& be = *f.real;
  he::SeededRandom rng(16);
  const auto u = RandomValues(8, -1, 1, 17);
  const auto ct = be.Encrypt(f.real_keys.pub, u, rng);
  for (std::size_t i = 0; i < 8; ++i) {
    std::vector<double> e(8, 0.0);
    e[i] = 1.0;
    const auto r = be.Decrypt(f.real_keys.secret, he::InnerProductCtPt(be, f.real_keys.pub, ct, e));
    CHECK(std::abs(r[0] - u[i]) <= 1e-4);
  }
  const std::vector<double> ones(8, 1.0);
  const auto ones_ct = be.Encrypt(f.real_keys.pub, ones, rng);
  CHECK(std::abs(be.Decrypt(f.real_keys.secret, he::InnerProductCtPt(be, f.real_keys.pub, ones_ct, ones))[0] - 8.0) <= 1e-2);

  int good = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = RandomValues(64, -10, 10, 1000 + static_cast<std::uint64_t>(trial));
    const auto w = RandomValues(64, -10, 10, 2000 + static_cast<std::uint64_t>(trial));
    double dot = 0;
    for (std::size_t i = 0; i < 64; ++i) dot += a[i] * w[i];
    const auto rep = he::Replicate(a, 64, be.slot_count());
    const auto r = be.Decrypt(f.real_keys.secret,
                              he::InnerProductCtPt(be, f.real_keys.pub, be.Encrypt(f.real_keys.pub, rep, rng), w));
    const bool ok = std::abs(r[0] - dot) <= 1e-3 * std::max(1.0, std::abs(dot)) &&
                    std::abs(r[777] - dot) <= 1e-3 * std::max(1.0, std::abs(dot));
    good += ok;
  }
  CHECK(good == 100);
}

TEST_CASE("matrix-vector products") {
  auto& f = F();
  for (auto* be : {f.real.get(), f.mock.get()}) {
    const auto& keys = be == f.real.get() ? f.real_keys : f.mock_keys;
    he::SeededRandom rng(18);
    const Vector z = Vector::LinSpaced(6, -1.0, 1.5);
    const Vector c = Vector::LinSpaced(6, 0.5, 3.0);
    const auto plan = he::PlanMatVec(be->slot_count(), 6, 6);
    CHECK(plan.period == 8);
    CHECK(plan.outputs_pad == 8);
    const auto q = be->Encrypt(keys.pub, he::Replicate(std::vector<double>(z.data(), z.data() + 6), plan.period, be->slot_count()), rng);
    const auto out = he::MatVecCtPt(*be, keys.pub, q, Matrix::Identity(6, 6), c);
    CHECK(out.depth == 1);
    CHECK(out.level == be->top_level() - 1);
    const auto got = be->Decrypt(keys.secret, out);
    for (int i = 0; i < 6; ++i) CHECK(std::abs(got[static_cast<std::size_t>(i)] - (z(i) + c(i))) <= 1e-3);
    const auto zero = be->Decrypt(keys.secret, he::MatVecCtPt(*be, keys.pub, q, Matrix::Zero(6, 6), c));
    for (int i = 0; i < 6; ++i) CHECK(std::abs(zero[static_cast<std::size_t>(i)] - c(i)) <= 1e-3);
  }

  // head trained on 8-dim synthetic data
  auto& be = *f.real;
  held::tensor_store::SyntheticSpec spec;
  spec.latent_dim = 4;
  spec.d_a = 8;
  spec.d_b = 8;
  spec.n_classes = 3;
  spec.noise_std = 0.1;
  spec.n = 300;
  const auto data = held::tensor_store::SynthPaired(spec);
  const auto head = held::classifier_ood::TrainHead(data.z_a, data.labels);
  const Matrix logits = held::classifier_ood::Logits(head, data.z_a.topRows(20));
  const auto plan = he::PlanMatVec(be.slot_count(), 8, 3);
  he::SeededRandom rng(19);
  for (Eigen::Index i = 0; i < 20; ++i) {
    const Vector row = data.z_a.row(i).transpose();
    const auto q = be.Encrypt(f.real_keys.pub, he::Replicate(std::vector<double>(row.data(), row.data() + 8), plan.period, be.slot_count()), rng);
    const auto enc = be.Decrypt(f.real_keys.secret, he::MatVecCtPt(be, f.real_keys.pub, q, head.V, head.c));
    int best = 0;
    for (int k = 0; k < 3; ++k) {
      CHECK(std::abs(enc[static_cast<std::size_t>(k)] - logits(i, k)) <= 1e-3);
      if (enc[static_cast<std::size_t>(k)] > enc[static_cast<std::size_t>(best)]) best = k;
    }
    CHECK(best == held::classifier_ood::ArgmaxRows(logits.row(i))[0]);
  }
}

TEST_CASE("scalar multiply-accumulate") {
  auto& f = F();
  const auto& be = *f.real;
  he::SeededRandom rng(20);
  const auto v = RandomValues(32, -10, 10, 21);
  const auto ct = be.Encrypt(f.real_keys.pub, v, rng);

  std::optional<he::Ciphertext> acc;
  he::ScalarMulAccumulate(be, acc, ct, 1.0);
  CHECK(WithinRelative(be.Decrypt(f.real_keys.secret, be.Rescale(*acc)), v, 1e-3));
  const auto before = be.Decrypt(f.real_keys.secret, be.Rescale(*acc));
  he::ScalarMulAccumulate(be, acc, ct, 0.0);
  CHECK(MaxAbsDiff(be.Decrypt(f.real_keys.secret, be.Rescale(*acc)), before) <= 1e-6);

  std::optional<he::Ciphertext> sum;
  std::vector<double> want(32, 0.0);
  std::mt19937_64 g(22);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int k = 0; k < 10; ++k) {
    const auto vk = RandomValues(32, -10, 10, 30 + static_cast<std::uint64_t>(k));
    const double s = u(g);
    for (std::size_t i = 0; i < 32; ++i) want[i] += s * vk[i];
    he::ScalarMulAccumulate(be, sum, be.Encrypt(f.real_keys.pub, vk, rng), s);
  }
  // mismatched accumulator
  auto fresh = ct;
  CHECK_THROWS_AS(be.MultiplyScalarAccumulate(fresh, ct, 1.0), held::InvalidArgument);
  const auto result = be.Rescale(*sum);
  CHECK(result.depth == 1);
  CHECK(WithinRelative(be.Decrypt(f.real_keys.secret, result), want, 1e-3));
}

TEST_CASE("serialization and sizes") {
  auto& f = F();
  he::SeededRandom rng(23);
  const auto v = RandomValues(100, -1, 1, 24);
  const auto ct = f.real->Encrypt(f.real_keys.pub, v, rng);
  const auto bytes = f.real->Serialize(ct);
  CHECK(bytes.size() == f.real->ByteSize(ct));
  CHECK(f.real->ByteSize(ct) <= 1048576);
  const auto back = f.real->Deserialize(bytes);
  CHECK(f.real->Serialize(back) == bytes);
  CHECK(back.limbs == ct.limbs);

  const auto mct = f.mock->Encrypt(f.mock_keys.pub, v, rng);
  CHECK(f.mock->ByteSize(mct) == f.real->ByteSize(ct));
  CHECK(f.mock->Serialize(mct).size() == bytes.size());
  const auto lower = f.real->MulPlain(ct, v);
  CHECK(f.mock->ByteSize(f.mock->MulPlain(mct, v)) == f.real->ByteSize(lower));
  CHECK(f.real->Serialize(lower).size() == f.real->ByteSize(lower));
  MESSAGE("fresh ciphertext bytes " << bytes.size() << ", after one rescale " << f.real->ByteSize(lower));

  CHECK_THROWS_AS(f.mock->Deserialize(bytes), held::FormatError);
  CHECK_THROWS_AS(f.real->Deserialize(std::span(bytes).first(bytes.size() - 1)), held::FormatError);

  CHECK(f.mock->SerializePublicKey(f.mock_keys.pub).size() ==
        f.real->SerializePublicKey(f.real_keys.pub).size());
  CHECK(f.mock->SerializeGaloisKeys(f.mock_keys.pub).size() ==
        f.real->SerializeGaloisKeys(f.real_keys.pub).size());

  he::PublicMaterial rebuilt;
  f.real->DeserializeKeyBlob(f.real->SerializePublicKey(f.real_keys.pub), rebuilt);
  f.real->DeserializeKeyBlob(f.real->SerializeGaloisKeys(f.real_keys.pub), rebuilt);
  CHECK(rebuilt.key_id == f.real_keys.pub.key_id);
  CHECK(rebuilt.public_key == f.real_keys.pub.public_key);
  CHECK(rebuilt.galois_keys == f.real_keys.pub.galois_keys);
  const auto x = f.real->Decrypt(f.real_keys.secret, f.real->Rotate(rebuilt, f.real->Encrypt(rebuilt, v, rng), 3));
  CHECK(std::abs(x[0] - v[3]) <= 1e-5);
}

TEST_CASE("depth budget and rotation keys") {
  auto& f = F();
  for (auto* be : {f.real.get(), f.mock.get()}) {
    const auto& keys = be == f.real.get() ? f.real_keys : f.mock_keys;
    he::SeededRandom rng(25);
    const std::vector<double> v(8, 0.5);
    const auto once = be->MulPlain(be->Encrypt(keys.pub, v, rng), v);
    CHECK_THROWS_AS(be->MulPlain(once, v), he::DepthExhausted);
    CHECK_THROWS_AS(be->MultiplyScalarNoRescale(once, 2.0), he::DepthExhausted);
    CHECK_THROWS_AS(be->Rescale(be->Rescale(once)), he::DepthExhausted);
    CHECK_THROWS_AS(be->Add(be->MultiplyScalarNoRescale(be->Encrypt(keys.pub, v, rng), 1.0),
                            be->Encrypt(keys.pub, v, rng)),
                    held::InvalidArgument);

    he::SeededRandom kr(26);
    const auto partial = be->KeyGen(kr, {1, 2});
    const auto ct = be->Encrypt(partial.pub, v, rng);
    CHECK_NOTHROW(be->Rotate(partial.pub, ct, 3));
    CHECK_THROWS_AS(be->Rotate(partial.pub, ct, 4), he::MissingRotationKey);
    CHECK_THROWS_AS(he::InnerProductCtPt(*be, partial.pub, ct, std::vector<double>(16, 1.0)),
                    he::MissingRotationKey);
  }
}

TEST_CASE("decrypt calls are attributed to the calling party") {
  auto& f = F();
  he::ResetDecryptCounts();
  he::SeededRandom rng(27);
  const auto ct = f.mock->Encrypt(f.mock_keys.pub, std::vector<double>{1.0}, rng);
  {
    he::ScopedParty b(he::Party::kB);
    f.mock->Decrypt(f.mock_keys.secret, ct);
    f.mock->Decrypt(f.mock_keys.secret, ct);
  }
  {
    he::ScopedParty a(he::Party::kA);
    CHECK(he::CurrentParty() == he::Party::kA);
  }
  CHECK(he::CurrentParty() == he::Party::kNone);
  CHECK(he::DecryptCount(he::Party::kB) == 2);
  CHECK(he::DecryptCount(he::Party::kA) == 0);
}

TEST_CASE("homomorphism suite on random draws") {
  auto& f = F();
  const auto& be = *f.real;
  he::SeededRandom rng(28);
  std::mt19937_64 g(29);
  std::uniform_int_distribution<int> op(0, 3), shift(1, 15);
  int failures = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const auto u = RandomValues(16, -100, 100, 5000 + static_cast<std::uint64_t>(t));
    const auto p = RandomValues(16, -100, 100, 9000 + static_cast<std::uint64_t>(t));
    const auto rep = he::Replicate(u, 16, be.slot_count());
    const auto ct = be.Encrypt(f.real_keys.pub, rep, rng);
    std::vector<double> want(16);
    std::vector<double> got;
    switch (op(g)) {
      case 0:
        for (std::size_t i = 0; i < 16; ++i) want[i] = u[i] + p[i];
        got = be.Decrypt(f.real_keys.secret, be.Add(ct, be.Encrypt(f.real_keys.pub, he::Replicate(p, 16, be.slot_count()), rng)));
        break;
      case 1:
        for (std::size_t i = 0; i < 16; ++i) want[i] = u[i] * p[i];
        got = be.Decrypt(f.real_keys.secret, be.MulPlain(ct, p));
        break;
      case 2: {
        const int k = shift(g);
        for (std::size_t i = 0; i < 16; ++i) want[i] = u[(i + static_cast<std::size_t>(k)) % 16];
        got = be.Decrypt(f.real_keys.secret, be.Rotate(f.real_keys.pub, ct, k));
        break;
      }
      default: {
        double dot = 0;
        for (std::size_t i = 0; i < 16; ++i) dot += u[i] * p[i];
        want.assign(1, dot);
        got = be.Decrypt(f.real_keys.secret, he::InnerProductCtPt(be, f.real_keys.pub, ct, p));
        break;
      }
    }
    failures += !WithinRelative(got, want, 1e-3);
  }
  CHECK(failures == 0);
}
