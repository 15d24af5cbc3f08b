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
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "held/alignment/alignment.hpp"
#include "held/classifier_ood/classifier.hpp"
#include "held/common/error.hpp"
#include "held/tensor_store/synthetic.hpp"
#include "test_util.hpp"

namespace co = held::classifier_ood;
using held::Labels;
using held::Matrix;
using held::Vector;

namespace {

Matrix Gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return held::tensor_store::GaussianMatrix(r, c, rng);
}

co::LinearHead HandHead(Matrix v, Vector c) {
  co::LinearHead h;
  h.V = std::move(v);
  h.c = std::move(c);
  return h;
}

// Classic perceptron on augmented rows; returns true when it finds a
// separating hyperplane within the epoch budget.
bool PerceptronSeparates(const Matrix& z, const Labels& y, int epochs = 1000) {
  Vector w = Vector::Zero(z.cols() + 1);
  for (int e = 0; e < epochs; ++e) {
    int mistakes = 0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      Vector x(z.cols() + 1);
      x << z.row(i).transpose(), 1.0;
      const double s = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
      if (s * w.dot(x) <= 0.0) {
        w += s * x;
        ++mistakes;
      }
    }
    if (mistakes == 0) return true;
  }
  return false;
}

double AurocPairs(const Vector& id, const Vector& ood) {
  double credit = 0;
  for (Eigen::Index i = 0; i < ood.size(); ++i) {
    for (Eigen::Index j = 0; j < id.size(); ++j) {
      if (ood(i) > id(j)) credit += 1.0;
      else if (ood(i) == id(j)) credit += 0.5;
    }
  }
  return credit / static_cast<double>(id.size() * ood.size());
}

Vector Vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("separable blobs are fit to near-perfect train accuracy") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Matrix z = 0.5 * Gaussian(200, 2, seed);
    Labels y(200);
    for (int i = 0; i < 200; ++i) {
      y[static_cast<std::size_t>(i)] = i % 2;
      z(i, 0) += i % 2 == 0 ? -3.0 : 3.0;
      z(i, 1) += i % 2 == 0 ? 1.0 : -1.0;
    }
    REQUIRE(PerceptronSeparates(z, y));
    co::HeadConfig cfg;
    cfg.l2 = 1e-2;
    const auto head = co::TrainHead(z, y, cfg);
    CHECK(co::Accuracy(co::Predict(head, z), y) >= 0.99);
  }
}

TEST_CASE("labels independent of features stay near chance") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix z = Gaussian(400, 8, seed);
    std::mt19937_64 rng(seed + 77);
    Labels y(400);
    for (int i = 0; i < 400; ++i) y[static_cast<std::size_t>(i)] = i % 4;
    std::shuffle(y.begin(), y.end(), rng);
    const auto head = co::TrainHead(z, y);
    CHECK(co::Accuracy(co::Predict(head, z), y) <= 0.45);
  }
}

TEST_CASE("duplicating every sample leaves the head unchanged") {
  const Matrix z = Gaussian(60, 4, 3);
  Labels y(60);
  for (int i = 0; i < 60; ++i) y[static_cast<std::size_t>(i)] = (z(i, 0) + z(i, 1) > 0) + (z(i, 2) > 1 ? 1 : 0);
  const auto once = co::TrainHead(z, y);
  Labels yy = y;
  yy.insert(yy.end(), y.begin(), y.end());
  const auto twice = co::TrainHead(held::VStack(z, z), yy);
  CHECK((once.V - twice.V).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((once.c - twice.c).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("training reaches a stationary point of the stated objective") {
  const Matrix z = Gaussian(150, 3, 4);
  Labels y(150);
  for (int i = 0; i < 150; ++i) y[static_cast<std::size_t>(i)] = z(i, 0) > 0.3 ? 2 : (z(i, 1) > 0 ? 1 : 0);
  co::HeadConfig cfg;
  cfg.l2 = 0.1;
  cfg.max_iter = 20000;
  const auto head = co::TrainHead(z, y, cfg);
  CHECK(head.converged);
  // central finite differences of the loss vanish at the optimum
  auto loss = [&](const Matrix& v, const Vector& c) {
    double total = 0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const Vector l = v.transpose() * z.row(i).transpose() + c;
      const double m = l.maxCoeff();
      total += m + std::log((l.array() - m).exp().sum()) - l(y[static_cast<std::size_t>(i)]);
    }
    return total / z.rows() + 0.5 * cfg.l2 * v.squaredNorm();
  };
  const double h = 1e-5;
  for (Eigen::Index r = 0; r < head.V.rows(); ++r) {
    for (Eigen::Index c = 0; c < head.V.cols(); ++c) {
      Matrix vp = head.V, vm = head.V;
      vp(r, c) += h;
      vm(r, c) -= h;
      CHECK(std::abs((loss(vp, head.c) - loss(vm, head.c)) / (2 * h)) <= 1e-5);
    }
  }
}

TEST_CASE("train_head preconditions") {
  const Matrix z = Gaussian(10, 2, 1);
  CHECK_THROWS_AS(co::TrainHead(z, Labels(10, 0)), held::InvalidArgument);
  Labels missing{0, 2, 0, 2, 0, 2, 0, 2, 0, 2};
  CHECK_THROWS_AS(co::TrainHead(z, missing), held::InvalidArgument);
  Labels ok{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  CHECK_THROWS_AS(co::TrainHead(z, Labels(9, 0)), held::DimensionMismatch);
  Matrix bad = z;
  bad(3, 1) = std::nan("");
  CHECK_THROWS_AS(co::TrainHead(bad, ok), held::InvalidArgument);
  CHECK_NOTHROW(co::TrainHead(z, ok));
}

TEST_CASE("predict examples") {
  const auto zero = HandHead(Matrix::Zero(3, 2), Vec({2, 1}));
  const Labels p = co::Predict(zero, Gaussian(5, 3, 2));
  CHECK(std::all_of(p.begin(), p.end(), [](int c) { return c == 0; }));

  const auto tie = HandHead(Matrix::Zero(2, 3), Vec({1, 1, 1}));
  CHECK(co::Predict(tie, Matrix::Ones(1, 2))[0] == 0);
  const auto tie12 = HandHead(Matrix::Zero(2, 3), Vec({0, 4, 4}));
  CHECK(co::Predict(tie12, Matrix::Ones(1, 2))[0] == 1);

  Matrix v(2, 2);
  v << 1, -1,  //
      2, 0.5;
  const auto head = HandHead(v, Vec({0.1, -0.2}));
  Matrix z(3, 2);
  z << 1, 0,  //
      -1, 2,  //
      0.5, -0.5;
  const Matrix logits = co::Logits(head, z);
  for (int i = 0; i < 3; ++i) {
    int best = 0;
    double best_val = -1e300;
    for (int k = 0; k < 2; ++k) {
      double s = head.c(k);
      for (int d = 0; d < 2; ++d) s += z(i, d) * v(d, k);
      CHECK(logits(i, k) == doctest::Approx(s).epsilon(1e-15));
      if (s > best_val) {
        best_val = s;
        best = k;
      }
    }
    CHECK(co::Predict(head, z)[static_cast<std::size_t>(i)] == best);
  }
  CHECK_THROWS_AS(co::Predict(head, Matrix::Ones(1, 3)), held::DimensionMismatch);
}

TEST_CASE("energy examples") {
  Matrix l(1, 2);
  l << 0, 0;
  CHECK(co::EnergyFromLogits(l)(0) == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
  l << 1000, 1000;
  const double e = co::EnergyFromLogits(l)(0);
  CHECK(std::isfinite(e));
  CHECK(std::abs(e - (-1000.0 - std::log(2.0))) <= 1e-12);

  const Matrix r = Gaussian(4, 3, 5) * 3.0;
  const Vector got = co::EnergyFromLogits(r);
  for (int i = 0; i < 4; ++i) {
    long double s = 0;
    for (int k = 0; k < 3; ++k) s += std::exp(static_cast<long double>(r(i, k)));
    CHECK(std::abs(got(i) - static_cast<double>(-std::log(s))) <= 1e-10);
  }

  const Matrix big = Gaussian(20, 5, 6) * 1e4 / 4.0;
  CHECK(co::EnergyFromLogits(big.cwiseMax(-1e4).cwiseMin(1e4)).allFinite());
}

TEST_CASE("logit shift leaves predictions and shifts energy") {
  const auto head = HandHead(Gaussian(4, 3, 7), Vec({0.3, -0.1, 0.5}));
  const Matrix z = Gaussian(30, 4, 8);
  auto shifted = head;
  shifted.c.array() += 2.5;
  CHECK(co::Predict(head, z) == co::Predict(shifted, z));
  CHECK(((co::Energy(shifted, z) - co::Energy(head, z)).array() + 2.5).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("AUROC and FPR@95 on hand scores") {
  const Vector id = Vec({0, 1, 2, 3});
  const Vector ood = Vec({10, 11, 12, 13});
  auto r = co::OodFromScores(id, ood);
  CHECK(r.auroc == 1.0);
  CHECK(r.fpr_at_95_tpr == 0.0);
  CHECK(r.n_id == 4);

  const Vector same = Vec({1, 1, 1, 1});
  CHECK(co::Auroc(same, same) == 0.5);

  const Vector id6 = Vec({0.1, 0.4, 0.35, 0.8, 0.4, -1});
  const Vector ood6 = Vec({0.4, 0.9, 0.35, 0.05, 1.2, 0.8});
  CHECK(co::Auroc(id6, ood6) == AurocPairs(id6, ood6));
  // smallest OOD score needed for 6/6 is 0.05; every ID >= 0.05 except -1
  CHECK(co::FprAtTpr(id6, ood6) == doctest::Approx(5.0 / 6.0));

  CHECK_THROWS_AS(co::OodFromScores(Vec({1}), ood6), held::InvalidArgument);
}

TEST_CASE("AUROC properties") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    Vector id(17), ood(23);
    for (auto& x : id) x = g(rng);
    for (auto& x : ood) x = g(rng) + 0.7;
    const double a = co::Auroc(id, ood);
    CHECK(a == doctest::Approx(AurocPairs(id, ood)).epsilon(1e-15));
    CHECK(co::Auroc(id.array().exp().matrix(), ood.array().exp().matrix()) == a);
    CHECK(co::Auroc((3 * id.array() - 1).matrix(), (3 * ood.array() - 1).matrix()) == a);
    CHECK(a + co::Auroc(ood, id) == doctest::Approx(1.0).epsilon(1e-15));
    // rounded scores introduce ties
    const Vector ir = id.array().round(), orr = ood.array().round();
    CHECK(co::Auroc(ir, orr) == doctest::Approx(AurocPairs(ir, orr)).epsilon(1e-15));
  }
}

TEST_CASE("transfer through the identity map equals the baseline") {
  const Matrix z = Gaussian(100, 3, 12);
  Labels y(100);
  for (int i = 0; i < 100; ++i) y[static_cast<std::size_t>(i)] = z(i, 0) > 0;
  const auto head = co::TrainHead(z, y);
  held::alignment::AffineMap id;
  id.weight = Matrix::Identity(3, 3);
  id.bias = Vector::Zero(3);
  const Matrix ood = Gaussian(40, 3, 13) * 4.0;
  const auto t = co::TransferEval(head, id, z, y, ood);
  CHECK(t.accuracy == co::Accuracy(co::Predict(head, z), y));
  REQUIRE(t.ood.has_value());
  const auto base = co::OodEval(head, z, ood);
  CHECK(t.ood->auroc == base.auroc);
  CHECK(t.ood->fpr_at_95_tpr == base.fpr_at_95_tpr);

  held::alignment::AffineMap wrong = id;
  wrong.weight = Matrix::Identity(3, 2);
  wrong.bias = Vector::Zero(2);
  CHECK_THROWS_AS(co::TransferEval(head, wrong, z, y), held::DimensionMismatch);
}

TEST_CASE("planted pipeline: transferred accuracy tracks the baseline") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    held::tensor_store::SyntheticSpec spec;
    spec.latent_dim = 8;
    spec.d_a = 24;
    spec.d_b = 20;
    spec.noise_std = 0.1;
    spec.n_classes = 4;
    spec.seed = seed;
    const held::tensor_store::SyntheticWorld world(spec);
    const auto train = world.Sample(3000, seed * 3 + 1);
    const auto test = world.Sample(1000, seed * 3 + 2);
    const auto head = co::TrainHead(train.z_a, train.labels);
    const double baseline = co::Accuracy(co::Predict(head, test.z_a), test.labels);
    const auto fit = held::alignment::Fit(train.z_b, train.z_a);
    const auto t = co::TransferEval(head, fit.map, test.z_b, test.labels);
    CHECK(std::abs(t.accuracy - baseline) <= 0.03);
    MESSAGE("seed " << seed << " baseline " << baseline << " mapped " << t.accuracy);
  }
}

TEST_CASE("head sidecar round trip and report rows") {
  held::testing::ScratchDir dir("head");
  auto head = HandHead(Gaussian(5, 3, 14), Vec({1, 2, 3}));
  head.model_id = "m";
  head.dataset_id = "d";
  co::SaveHead(dir / "h.head", head);
  const auto back = co::LoadHead(dir / "h.head");
  CHECK(back.V == head.V);
  CHECK(back.c == head.c);
  CHECK(back.model_id == "m");
  CHECK_THROWS_AS(held::alignment::LoadAffineMap(dir / "h.head"), held::FormatError);

  co::EvalRow row{"A", "B", "sst2", 0.945, 0.931, 0.9, std::nullopt};
  const auto j = co::ToJson(row);
  CHECK(j["baseline_acc"] == 0.945);
  CHECK(j["auroc_mapped"].is_null());
  for (const char* key : {"party_a", "party_b", "dataset", "baseline_acc",
                          "mapped_acc", "auroc_baseline", "auroc_mapped"}) {
    CHECK(j.contains(key));
  }
}
