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

#include <cmath>
#include <fstream>

#include "doctest.h"
#include "held/alignment/alignment.hpp"
#include "held/common/error.hpp"
#include "held/tensor_store/synthetic.hpp"
#include "nlohmann/json.hpp"
#include "test_util.hpp"

namespace al = held::alignment;
namespace ts = held::tensor_store;
using held::Matrix;
using held::Vector;
using held::testing::RelFrobenius;
using held::testing::UniformMatrix;

namespace {

al::AffineMap MakeMap(Matrix w, Vector b) {
  al::AffineMap m;
  m.weight = std::move(w);
  m.bias = std::move(b);
  return m;
}

// Independent route: least squares on explicitly centered data with the
// ridge penalty appended as extra rows, solved by column-pivoting QR.
al::AffineMap DenseRidgeOracle(const Matrix& b, const Matrix& a,
                               double lambda) {
  const Vector mb = b.colwise().mean();
  const Vector ma = a.colwise().mean();
  const Matrix bc = b.rowwise() - mb.transpose();
  const Matrix ac = a.rowwise() - ma.transpose();
  Matrix lhs(b.rows() + b.cols(), b.cols());
  lhs << bc, std::sqrt(lambda) * Matrix::Identity(b.cols(), b.cols());
  Matrix rhs(a.rows() + b.cols(), a.cols());
  rhs << ac, Matrix::Zero(b.cols(), a.cols());
  al::AffineMap m;
  m.weight = lhs.colPivHouseholderQr().solve(rhs);
  m.bias = ma - m.weight.transpose() * mb;
  return m;
}

ts::SyntheticPair Planted(std::uint64_t seed, double noise = 0.0,
                          std::int64_t n = 400) {
  ts::SyntheticSpec spec;
  spec.n = n;
  spec.latent_dim = 6;
  spec.d_a = 10;
  spec.d_b = 8;
  spec.noise_std = noise;
  spec.seed = seed;
  return ts::SynthPaired(spec);
}

}  // namespace

TEST_CASE("accumulate of an empty batch leaves stats unchanged") {
  std::mt19937_64 rng(1);
  al::SufficientStats s(3, 2);
  s.Accumulate(UniformMatrix(5, 3, rng), UniformMatrix(5, 2, rng));
  const Matrix gram = s.gram();
  const Matrix cross = s.cross();
  s.Accumulate(Matrix(0, 3), Matrix(0, 2));
  CHECK(s.gram() == gram);
  CHECK(s.cross() == cross);
  CHECK(s.count() == 5);
}

TEST_CASE("row-at-a-time accumulation matches one dense batch") {
  std::mt19937_64 rng(2);
  const Matrix b = UniformMatrix(120, 7, rng, -3, 3);
  const Matrix a = UniformMatrix(120, 4, rng, -3, 3);
  al::SufficientStats whole(7, 4), rows(7, 4);
  whole.Accumulate(b, a);
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    rows.Accumulate(b.middleRows(i, 1), a.middleRows(i, 1));
  }
  // dense oracle computed directly
  CHECK(RelFrobenius(whole.gram(), b.transpose() * b) <= 1e-12);
  CHECK(RelFrobenius(rows.gram(), whole.gram()) <= 1e-9);
  CHECK(RelFrobenius(rows.cross(), whole.cross()) <= 1e-9);
  CHECK(RelFrobenius(rows.sum_source(), whole.sum_source()) <= 1e-9);
  CHECK(rows.count() == whole.count());
  CHECK((rows.gram() - rows.gram().transpose()).norm() == 0.0);
}

TEST_CASE("merging is associative, commutative and matches full data") {
  std::mt19937_64 rng(3);
  const Matrix b = UniformMatrix(90, 5, rng);
  const Matrix a = UniformMatrix(90, 3, rng);
  al::SufficientStats p(5, 3), q(5, 3), r(5, 3), full(5, 3);
  p.Accumulate(b.topRows(30), a.topRows(30));
  q.Accumulate(b.middleRows(30, 30), a.middleRows(30, 30));
  r.Accumulate(b.bottomRows(30), a.bottomRows(30));
  full.Accumulate(b, a);

  al::SufficientStats left = p;  // (p + q) + r
  left.Merge(q);
  left.Merge(r);
  al::SufficientStats right = r;  // r + (q + p)
  al::SufficientStats qp = q;
  qp.Merge(p);
  right.Merge(qp);
  CHECK(RelFrobenius(left.gram(), full.gram()) <= 1e-12);
  CHECK(RelFrobenius(right.gram(), left.gram()) <= 1e-12);
  CHECK(RelFrobenius(right.cross(), full.cross()) <= 1e-12);
  CHECK(left.count() == 90);

  al::SufficientStats wrong(4, 3);
  CHECK_THROWS_AS(left.Merge(wrong), held::DimensionMismatch);
}

TEST_CASE("accumulate rejects mismatched batches") {
  al::SufficientStats s(3, 2);
  CHECK_THROWS_AS(s.Accumulate(Matrix::Zero(4, 3), Matrix::Zero(5, 2)),
                  held::DimensionMismatch);
  CHECK_THROWS_AS(s.Accumulate(Matrix::Zero(4, 2), Matrix::Zero(4, 2)),
                  held::DimensionMismatch);
}

TEST_CASE("self alignment recovers the identity") {
  std::mt19937_64 rng(4);
  const Matrix z = UniformMatrix(200, 6, rng);
  al::SufficientStats s(6, 6);
  s.Accumulate(z, z);
  const auto map = al::Solve(s, 1e-12);
  CHECK((map.weight - Matrix::Identity(6, 6)).norm() <= 1e-6);
  CHECK(map.bias.norm() <= 1e-6);
}

TEST_CASE("planted noiseless map is recovered") {
  const auto s = Planted(10);
  const auto fit = al::Fit(s.z_b, s.z_a, 1e-9);
  const Matrix pred = al::Apply(fit.map, s.z_b);
  CHECK((pred - s.z_a).norm() / s.z_a.norm() <= 1e-6);
  CHECK(fit.report.train_mse <= 1e-12);
  CHECK(fit.report.n_train == 400);
}

TEST_CASE("huge lambda shrinks W to zero and b to the target mean") {
  std::mt19937_64 rng(5);
  const Matrix b = UniformMatrix(100, 5, rng);
  const Matrix a = UniformMatrix(100, 4, rng);
  const auto fit = al::Fit(b, a, 1e9);
  CHECK(fit.map.weight.norm() <= 1e-6);
  const Vector mean_a = a.colwise().mean();
  CHECK((fit.map.bias - mean_a).norm() <= 1e-6);
}

TEST_CASE("no-bias option solves the uncentered system") {
  std::mt19937_64 rng(6);
  const Matrix b = UniformMatrix(80, 4, rng);
  const Matrix a = b * UniformMatrix(4, 3, rng);
  al::SolveOptions opts;
  opts.fit_bias = false;
  const auto fit = al::Fit(b, a, 1e-10, opts);
  CHECK(fit.map.bias.norm() == 0.0);
  CHECK(fit.map.fit_bias == false);
  const Matrix expect = (b.transpose() * b + 1e-10 * Matrix::Identity(4, 4))
                            .ldlt()
                            .solve(b.transpose() * a);
  CHECK(RelFrobenius(fit.map.weight, expect) <= 1e-9);
}

TEST_CASE("solve preconditions") {
  al::SufficientStats empty(3, 2);
  CHECK_THROWS_AS(al::Solve(empty, 1e-4), held::InvalidArgument);
  std::mt19937_64 rng(7);
  al::SufficientStats s(3, 2);
  s.Accumulate(UniformMatrix(4, 3, rng), UniformMatrix(4, 2, rng));
  CHECK_THROWS_AS(al::Solve(s, 0.0), held::InvalidArgument);
  CHECK_THROWS_AS(al::Solve(s, -1.0), held::InvalidArgument);
  auto bad = al::SufficientStats::FromParts(
      Matrix::Constant(3, 3, std::nan("")), s.cross(), s.sum_source(),
      s.sum_target(), 4);
  CHECK_THROWS_AS(al::Solve(bad, 1e-4), held::InvalidArgument);
}

TEST_CASE("fewer rows than source dims is legal") {
  std::mt19937_64 rng(8);
  const auto fit =
      al::Fit(UniformMatrix(5, 20, rng), UniformMatrix(5, 3, rng), 1e-4);
  CHECK(fit.map.weight.allFinite());
  CHECK(fit.map.weight.rows() == 20);
}

TEST_CASE("apply examples") {
  std::mt19937_64 rng(9);
  const Matrix z = UniformMatrix(4, 3, rng);
  al::AffineMap id = MakeMap(Matrix::Identity(3, 3), Vector::Zero(3));
  CHECK(al::Apply(id, z) == z);

  al::AffineMap constant = MakeMap(Matrix::Zero(3, 2), Vector(2));
  constant.bias << 1.5, -2.0;
  const Matrix c = al::Apply(constant, z);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(c(i, 0) == 1.5);
    CHECK(c(i, 1) == -2.0);
  }

  // 5x3 map applied to 4 rows of 5 dims, scalar-loop oracle
  al::AffineMap m = MakeMap(UniformMatrix(5, 3, rng), Vector(3));
  m.bias << 0.1, 0.2, -0.3;
  const Matrix x = UniformMatrix(4, 5, rng);
  const Matrix y = al::Apply(m, x);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = m.bias(j);
      for (int k = 0; k < 5; ++k) acc += x(i, k) * m.weight(k, j);
      CHECK(std::abs(y(i, j) - acc) <= 1e-12);
    }
  }
  CHECK_THROWS_AS(al::Apply(m, z), held::DimensionMismatch);
}

TEST_CASE("streamed solve matches the dense QR oracle for any batching") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 20 + static_cast<Eigen::Index>(rng() % 180);
    const Eigen::Index db = 1 + static_cast<Eigen::Index>(rng() % 16);
    const Eigen::Index da = 1 + static_cast<Eigen::Index>(rng() % 16);
    const Matrix b = UniformMatrix(n, db, rng, -2, 2);
    const Matrix a = UniformMatrix(n, da, rng, -2, 2);
    const double lambda = 1e-3;
    al::SufficientStats stats(db, da);
    Eigen::Index row = 0;
    while (row < n) {
      const Eigen::Index take =
          std::min<Eigen::Index>(n - row, 1 + static_cast<Eigen::Index>(rng() % 17));
      stats.Accumulate(b.middleRows(row, take), a.middleRows(row, take));
      row += take;
    }
    const auto streamed = al::Solve(stats, lambda);
    const auto dense = DenseRidgeOracle(b, a, lambda);
    CHECK(RelFrobenius(streamed.weight, dense.weight) <= 1e-8);
    CHECK((streamed.bias - dense.bias).norm() <=
          1e-8 * std::max(1.0, dense.bias.norm()));
  }
}

TEST_CASE("solution beats random perturbations of the ridge objective") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix b = UniformMatrix(150, 8, rng);
    const Matrix a = UniformMatrix(150, 6, rng);
    const double lambda = 0.5;
    const auto fit = al::Fit(b, a, lambda);
    const double best =
        al::RidgeObjective(b, a, fit.map.weight, fit.map.bias, lambda);
    for (int p = 0; p < 100; ++p) {
      const double eps = 1e-3 * (1 + p % 7);
      const Matrix w = fit.map.weight + eps * UniformMatrix(8, 6, rng);
      const Vector bb = fit.map.bias + eps * UniformMatrix(6, 1, rng);
      REQUIRE(al::RidgeObjective(b, a, w, bb, lambda) >= best);
    }
  }
}

TEST_CASE("ridge objective gradient vanishes at the solution") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index d = 2 + trial;  // d <= 8
    const Matrix b = UniformMatrix(60, d, rng);
    const Matrix a = UniformMatrix(60, d, rng);
    const double lambda = 0.1;
    const auto fit = al::Fit(b, a, lambda);
    Matrix w = fit.map.weight;
    Vector bias = fit.map.bias;
    const double h = 1e-5;
    double grad_sq = 0.0;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        const double keep = w(i, j);
        w(i, j) = keep + h;
        const double up = al::RidgeObjective(b, a, w, bias, lambda);
        w(i, j) = keep - h;
        const double down = al::RidgeObjective(b, a, w, bias, lambda);
        w(i, j) = keep;
        grad_sq += std::pow((up - down) / (2 * h), 2);
      }
    }
    for (Eigen::Index j = 0; j < bias.size(); ++j) {
      const double keep = bias(j);
      bias(j) = keep + h;
      const double up = al::RidgeObjective(b, a, w, bias, lambda);
      bias(j) = keep - h;
      const double down = al::RidgeObjective(b, a, w, bias, lambda);
      bias(j) = keep;
      grad_sq += std::pow((up - down) / (2 * h), 2);
    }
    CHECK(std::sqrt(grad_sq) <= 1e-6 * (1 + w.norm()));
  }
}

TEST_CASE("weight norm shrinks monotonically with lambda") {
  std::mt19937_64 rng(13);
  const Matrix b = UniformMatrix(100, 6, rng);
  const Matrix a = UniformMatrix(100, 4, rng);
  double previous = std::numeric_limits<double>::infinity();
  for (double lambda : {1e-6, 1e-3, 1e-1, 1.0, 10.0, 1e3, 1e6}) {
    const double norm = al::Fit(b, a, lambda).map.weight.norm();
    CHECK(norm <= previous);
    previous = norm;
  }
}

TEST_CASE("training-size sweep") {
  SUBCASE("a single full-size entry equals a plain fit") {
    const auto s = Planted(20, 0.3, 200);
    const auto reports = al::SweepTrainingSize(s.z_b, s.z_a, 1e-4, {200}, 0.0);
    REQUIRE(reports.size() == 1);
    const auto fit = al::Fit(s.z_b, s.z_a, 1e-4);
    CHECK(reports[0].train_mse == doctest::Approx(fit.report.train_mse).epsilon(1e-12));
    CHECK_FALSE(reports[0].holdout_mse.has_value());
  }
  SUBCASE("noiseless data is recovered once size reaches the latent rank") {
    const auto s = Planted(21, 0.0, 500);
    // Linear map: k rows suffice. Affine map: centering spends one row.
    al::SolveOptions linear;
    linear.fit_bias = false;
    for (const auto& r : al::SweepTrainingSize(s.z_b, s.z_a, 1e-9,
                                               {6, 10, 50, 400}, 0.2, linear)) {
      CHECK(*r.holdout_mse <= 1e-9);
    }
    for (const auto& r : al::SweepTrainingSize(s.z_b, s.z_a, 1e-9,
                                               {7, 10, 50, 400}, 0.2)) {
      CHECK(*r.holdout_mse <= 1e-9);
    }
  }
  SUBCASE("noisy holdout error is non-increasing up to sampling noise") {
    const std::vector<std::int64_t> sizes = {20, 40, 80, 160, 320, 640};
    std::vector<double> mean(sizes.size(), 0.0);
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const auto s = Planted(100 + seed, 0.5, 1000);
      const auto reports = al::SweepTrainingSize(s.z_b, s.z_a, 1e-4, sizes, 0.3);
      for (std::size_t i = 0; i < sizes.size(); ++i) {
        mean[i] += *reports[i].holdout_mse / 8.0;
      }
    }
    for (std::size_t i = 1; i < sizes.size(); ++i) {
      CHECK(mean[i] <= 2.0 * mean[i - 1]);
    }
    CHECK(mean.back() < mean.front());
  }
  SUBCASE("sizes beyond the non-holdout rows are rejected") {
    const auto s = Planted(22, 0.1, 100);
    CHECK_THROWS_AS(al::SweepTrainingSize(s.z_b, s.z_a, 1e-4, {90}, 0.2),
                    held::InvalidArgument);
  }
}

TEST_CASE("affine map sidecar round trip") {
  held::testing::ScratchDir dir("map");
  std::mt19937_64 rng(14);
  al::AffineMap m = MakeMap(UniformMatrix(5, 3, rng), Vector::Constant(3, 0.25));
  m.lambda = 1e-4;
  m.n_train = 123;
  m.source_model_id = "model-b";
  m.target_model_id = "model-a";
  al::SaveAffineMap(dir / "out.map", m);
  CHECK(std::filesystem::exists(dir / "out.map.W.tns"));
  CHECK(std::filesystem::exists(dir / "out.map.b.tns"));
  const auto back = al::LoadAffineMap(dir / "out.map");
  CHECK(back.weight == m.weight);
  CHECK(back.bias == m.bias);
  CHECK(back.lambda == m.lambda);
  CHECK(back.n_train == 123);
  CHECK(back.source_model_id == "model-b");
  std::ifstream in(dir / "out.map");
  const auto doc = nlohmann::json::parse(in);
  CHECK(doc["kind"] == "affine_map");
  CHECK(doc["metadata"]["target_dim"] == 3);
}
