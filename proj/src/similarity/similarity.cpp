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

#include "held/similarity/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "held/common/error.hpp"

namespace held::similarity {

namespace {

Matrix CenterColumns(const Matrix& x) {
  return x.rowwise() - x.colwise().mean();
}

Matrix InverseSqrt(const Matrix& spd) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(spd);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("eigen-decomposition failed while whitening");
  }
  Vector inv = eig.eigenvalues();
  for (Eigen::Index i = 0; i < inv.size(); ++i) {
    if (inv(i) <= 0.0) throw NumericalError("covariance is not positive definite");
    inv(i) = 1.0 / std::sqrt(inv(i));
  }
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

double AbsPearson(const Vector& x, const Vector& y) {
  const Vector xc = x.array() - x.mean();
  const Vector yc = y.array() - y.mean();
  const double denom = xc.norm() * yc.norm();
  if (denom <= 0.0) return 0.0;
  return std::min(1.0, std::abs(xc.dot(yc)) / denom);
}

std::vector<double> EvalCorrelations(const Pca& pa, const Pca& pb,
                                     const Cca& cca, const Matrix& eval_a,
                                     const Matrix& eval_b) {
  const Matrix ua = pa.Project(eval_a) * cca.directions_a;
  const Matrix ub = pb.Project(eval_b) * cca.directions_b;
  std::vector<double> corrs(static_cast<std::size_t>(ua.cols()));
  for (Eigen::Index j = 0; j < ua.cols(); ++j) {
    corrs[static_cast<std::size_t>(j)] = AbsPearson(ua.col(j), ub.col(j));
  }
  std::sort(corrs.begin(), corrs.end(), std::greater<>());
  return corrs;
}

struct RepeatResult {
  std::vector<double> corrs;
  std::optional<double> shuffled_mean;
  int retained = 0;
};

RepeatResult RunOnce(const Matrix& train_a, const Matrix& train_b,
                     const Matrix& eval_a, const Matrix& eval_b,
                     const SvccaOptions& options, std::mt19937_64& rng) {
  RepeatResult out;
  const Pca pa = FitPca(train_a, options.n_components);
  const Pca pb = FitPca(train_b, options.n_components);
  const Cca cca =
      FitCca(pa.Project(train_a), pb.Project(train_b), options.epsilon);
  out.corrs = EvalCorrelations(pa, pb, cca, eval_a, eval_b);
  out.retained = static_cast<int>(out.corrs.size());

  if (options.shuffled_baseline) {
    // Break the pairing by permuting one model's rows in both splits.
    auto permuted = [&rng](const Matrix& x) {
      std::vector<std::int64_t> order(static_cast<std::size_t>(x.rows()));
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      return TakeRows(x, order);
    };
    const Matrix sb_train = permuted(train_b);
    const Matrix sb_eval = &eval_b == &train_b ? sb_train : permuted(eval_b);
    const Pca ps = FitPca(sb_train, options.n_components);
    const Cca scca =
        FitCca(pa.Project(train_a), ps.Project(sb_train), options.epsilon);
    const auto s = EvalCorrelations(pa, ps, scca, eval_a, sb_eval);
    out.shuffled_mean =
        s.empty() ? 0.0
                  : std::accumulate(s.begin(), s.end(), 0.0) /
                        static_cast<double>(s.size());
  }
  return out;
}

SvccaReport Combine(const std::vector<RepeatResult>& runs,
                    const SvccaOptions& options) {
  SvccaReport report;
  report.n_components = options.n_components;
  report.n_repeats = static_cast<int>(runs.size());
  std::size_t width = runs.front().corrs.size();
  for (const auto& r : runs) width = std::min(width, r.corrs.size());
  report.retained_components = static_cast<int>(width);
  report.rank_deficient = report.retained_components < options.n_components;
  report.per_component_corrs.assign(width, 0.0);
  double shuffled = 0.0;
  for (const auto& r : runs) {
    for (std::size_t j = 0; j < width; ++j) {
      report.per_component_corrs[j] += r.corrs[j] / static_cast<double>(runs.size());
    }
    if (r.shuffled_mean) shuffled += *r.shuffled_mean;
  }
  // Position-wise averages of sorted vectors stay sorted; re-sort anyway
  // so rounding never breaks the ordering invariant.
  std::sort(report.per_component_corrs.begin(), report.per_component_corrs.end(),
            std::greater<>());
  if (width > 0) {
    const auto& c = report.per_component_corrs;
    report.mean_corr =
        std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(width);
    std::vector<double> sorted(c.begin(), c.end());
    std::sort(sorted.begin(), sorted.end());
    report.median_corr = width % 2 == 1
                             ? sorted[width / 2]
                             : 0.5 * (sorted[width / 2 - 1] + sorted[width / 2]);
  }
  if (options.shuffled_baseline) {
    report.shuffled_baseline_mean = shuffled / static_cast<double>(runs.size());
  }
  return report;
}

void CheckOptions(const SvccaOptions& options) {
  Require(options.n_components >= 1, "n_components must be positive");
  Require(options.n_repeats >= 1, "n_repeats must be positive");
  Require(options.epsilon >= 0.0, "epsilon must be non-negative");
}

}  // namespace

Vector MeanPool(const Matrix& token_states) {
  Require(token_states.rows() >= 1, "cannot mean-pool an empty sequence");
  return token_states.colwise().mean().transpose();
}

double LinearCka(const Matrix& a, const Matrix& b) {
  RequireDims(a.rows() == b.rows(), "CKA inputs must have equal row counts");
  Require(a.rows() >= 2, "CKA needs at least two rows");
  const Matrix ac = CenterColumns(a);
  const Matrix bc = CenterColumns(b);
  double cross, self_a, self_b;
  const Eigen::Index n = a.rows();
  if (n < std::max(a.cols(), b.cols())) {
    // Kernel form: ||A^T B||_F^2 = <A A^T, B B^T>_F.
    const Matrix ka = ac * ac.transpose();
    const Matrix kb = bc * bc.transpose();
    cross = ka.cwiseProduct(kb).sum();
    self_a = ka.norm();
    self_b = kb.norm();
  } else {
    cross = (ac.transpose() * bc).squaredNorm();
    self_a = (ac.transpose() * ac).norm();
    self_b = (bc.transpose() * bc).norm();
  }
  if (self_a == 0.0 || self_b == 0.0) {
    throw InvalidArgument("CKA undefined: an input is constant across rows");
  }
  return std::clamp(cross / (self_a * self_b), 0.0, 1.0);
}

Matrix Pca::Project(const Matrix& x) const {
  RequireDims(x.cols() == mean.size(), "PCA input has wrong dimension");
  return (x.rowwise() - mean) * components;
}

Pca FitPca(const Matrix& x, int n_components) {
  Require(x.rows() >= 2, "PCA needs at least two rows");
  Require(n_components >= 1, "n_components must be positive");
  Pca p;
  p.mean = x.colwise().mean();
  const Matrix xc = x.rowwise() - p.mean;
  Eigen::BDCSVD<Matrix> svd(xc, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double tol = static_cast<double>(std::max(x.rows(), x.cols())) *
                     std::numeric_limits<double>::epsilon() *
                     (s.size() > 0 ? s(0) : 0.0);
  int rank = 0;
  while (rank < s.size() && s(rank) > tol) ++rank;
  p.rank = std::min(rank, n_components);
  p.components = svd.matrixV().leftCols(p.rank);
  p.singular_values = s.head(p.rank);
  return p;
}

Cca FitCca(const Matrix& a, const Matrix& b, double epsilon) {
  RequireDims(a.rows() == b.rows(), "CCA inputs must have equal row counts");
  Require(a.rows() >= 2, "CCA needs at least two rows");
  const Matrix ac = CenterColumns(a);
  const Matrix bc = CenterColumns(b);
  const double denom = static_cast<double>(a.rows() - 1);
  Matrix saa = ac.transpose() * ac / denom;
  Matrix sbb = bc.transpose() * bc / denom;
  const Matrix sab = ac.transpose() * bc / denom;
  saa.diagonal().array() += epsilon;
  sbb.diagonal().array() += epsilon;
  const Matrix wa = InverseSqrt(saa);
  const Matrix wb = InverseSqrt(sbb);
  Eigen::JacobiSVD<Matrix> svd(wa * sab * wb,
                               Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Index r = std::min(a.cols(), b.cols());
  Cca out;
  out.correlations = svd.singularValues().head(r).cwiseMin(1.0);
  out.directions_a = wa * svd.matrixU().leftCols(r);
  out.directions_b = wb * svd.matrixV().leftCols(r);
  return out;
}

SvccaReport Svcca(const Matrix& a, const Matrix& b,
                  const SvccaOptions& options) {
  CheckOptions(options);
  RequireDims(a.rows() == b.rows(), "SVCCA inputs must have equal row counts");
  const Eigen::Index n = a.rows();
  if (options.single_split) {
    Require(n >= options.n_components + 1,
            "SVCCA needs more rows than components");
    std::mt19937_64 rng(options.seed);
    std::vector<RepeatResult> runs;
    for (int r = 0; r < options.n_repeats; ++r) {
      runs.push_back(RunOnce(a, b, a, b, options, rng));
    }
    return Combine(runs, options);
  }
  Require(options.train_fraction > 0.0 && options.train_fraction < 1.0,
          "train_fraction must be in (0, 1)");
  const auto n_train = static_cast<Eigen::Index>(
      std::floor(options.train_fraction * static_cast<double>(n)));
  Require(n_train >= options.n_components + 1,
          "SVCCA needs more training rows than components");
  Require(n - n_train >= 2, "SVCCA needs at least two evaluation rows");
  std::vector<RepeatResult> runs;
  for (int r = 0; r < options.n_repeats; ++r) {
    std::mt19937_64 rng(options.seed + 0x9e3779b97f4a7c15ULL * (r + 1));
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::vector<std::int64_t> train(order.begin(), order.begin() + n_train);
    const std::vector<std::int64_t> eval(order.begin() + n_train, order.end());
    runs.push_back(RunOnce(TakeRows(a, train), TakeRows(b, train),
                           TakeRows(a, eval), TakeRows(b, eval), options, rng));
  }
  return Combine(runs, options);
}

SvccaReport SvccaSplit(const Matrix& train_a, const Matrix& train_b,
                       const Matrix& eval_a, const Matrix& eval_b,
                       const SvccaOptions& options) {
  CheckOptions(options);
  RequireDims(train_a.rows() == train_b.rows(),
              "training inputs must have equal row counts");
  RequireDims(eval_a.rows() == eval_b.rows(),
              "evaluation inputs must have equal row counts");
  Require(options.subsample_fraction > 0.0 && options.subsample_fraction <= 1.0,
          "subsample_fraction must be in (0, 1]");
  const auto take = static_cast<Eigen::Index>(std::floor(
      options.subsample_fraction * static_cast<double>(train_a.rows())));
  Require(take >= options.n_components + 1,
          "SVCCA needs more training rows than components");
  std::vector<RepeatResult> runs;
  for (int r = 0; r < options.n_repeats; ++r) {
    std::mt19937_64 rng(options.seed + 0x9e3779b97f4a7c15ULL * (r + 1));
    std::vector<std::int64_t> order(static_cast<std::size_t>(train_a.rows()));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(static_cast<std::size_t>(take));
    runs.push_back(RunOnce(TakeRows(train_a, order), TakeRows(train_b, order),
                           eval_a, eval_b, options, rng));
  }
  return Combine(runs, options);
}

nlohmann::json ToJson(const SvccaReport& report) {
  nlohmann::json j = {{"n_components", report.n_components},
                      {"retained_components", report.retained_components},
                      {"rank_deficient", report.rank_deficient},
                      {"n_repeats", report.n_repeats},
                      {"per_component_corrs", report.per_component_corrs},
                      {"mean_corr", report.mean_corr},
                      {"median_corr", report.median_corr}};
  if (report.shuffled_baseline_mean) {
    j["shuffled_baseline_mean"] = *report.shuffled_baseline_mean;
  }
  return j;
}

}  // namespace held::similarity
