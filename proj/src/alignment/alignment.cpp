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

#include "held/alignment/alignment.hpp"

#include <algorithm>
#include <cmath>

#include "held/common/error.hpp"
#include "held/tensor_store/dataset.hpp"

namespace held::alignment {

SufficientStats::SufficientStats(Eigen::Index source_dim,
                                 Eigen::Index target_dim)
    : gram_(Matrix::Zero(source_dim, source_dim)),
      cross_(Matrix::Zero(source_dim, target_dim)),
      sum_source_(Vector::Zero(source_dim)),
      sum_target_(Vector::Zero(target_dim)) {
  Require(source_dim >= 1 && target_dim >= 1, "dimensions must be positive");
}

void SufficientStats::Accumulate(const Matrix& batch_source,
                                 const Matrix& batch_target) {
  RequireDims(batch_source.rows() == batch_target.rows(),
              "source and target batches differ in row count");
  RequireDims(batch_source.cols() == source_dim(),
              "source batch has wrong dimension");
  RequireDims(batch_target.cols() == target_dim(),
              "target batch has wrong dimension");
  if (batch_source.rows() == 0) return;
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(batch_source.transpose());
  gram_.triangularView<Eigen::StrictlyUpper>() = gram_.transpose();
  cross_.noalias() += batch_source.transpose() * batch_target;
  sum_source_ += batch_source.colwise().sum().transpose();
  sum_target_ += batch_target.colwise().sum().transpose();
  count_ += batch_source.rows();
}

void SufficientStats::Merge(const SufficientStats& other) {
  RequireDims(other.source_dim() == source_dim() &&
                  other.target_dim() == target_dim(),
              "cannot merge stats of different shapes");
  gram_ += other.gram_;
  cross_ += other.cross_;
  sum_source_ += other.sum_source_;
  sum_target_ += other.sum_target_;
  count_ += other.count_;
}

SufficientStats SufficientStats::FromParts(Matrix gram, Matrix cross,
                                           Vector sum_source, Vector sum_target,
                                           std::int64_t count) {
  RequireDims(gram.rows() == gram.cols(), "gram must be square");
  RequireDims(cross.rows() == gram.rows(), "cross rows must match gram");
  RequireDims(sum_source.size() == gram.rows(), "source sum has wrong size");
  RequireDims(sum_target.size() == cross.cols(), "target sum has wrong size");
  Require(count >= 0, "count must be non-negative");
  SufficientStats s(gram.rows(), cross.cols());
  s.gram_ = std::move(gram);
  s.cross_ = std::move(cross);
  s.sum_source_ = std::move(sum_source);
  s.sum_target_ = std::move(sum_target);
  s.count_ = count;
  return s;
}

void AffineMap::Validate() const {
  RequireDims(bias.size() == weight.cols(), "bias length must equal d_A");
  Require(weight.allFinite() && bias.allFinite(),
          "affine map has non-finite entries");
}

AffineMap Solve(const SufficientStats& stats, double lambda,
                const SolveOptions& options) {
  Require(lambda > 0.0 && std::isfinite(lambda), "lambda must be positive");
  Require(stats.count() >= 1, "cannot solve from empty statistics");
  if (!stats.gram().allFinite() || !stats.cross().allFinite() ||
      !stats.sum_source().allFinite() || !stats.sum_target().allFinite()) {
    throw InvalidArgument("sufficient statistics contain non-finite values");
  }
  const auto n = static_cast<double>(stats.count());

  Matrix system;
  Matrix rhs;
  Vector mean_b, mean_a;
  if (options.fit_bias) {
    mean_b = stats.sum_source() / n;
    mean_a = stats.sum_target() / n;
    system = stats.gram() - n * mean_b * mean_b.transpose();
    rhs = stats.cross() - n * mean_b * mean_a.transpose();
  } else {
    system = stats.gram();
    rhs = stats.cross();
  }
  system.diagonal().array() += lambda;

  Matrix weight;
  Eigen::LLT<Matrix> llt(system.selfadjointView<Eigen::Lower>());
  if (llt.info() == Eigen::Success) {
    weight = llt.solve(rhs);
  } else {
    // Centering can leave the gram a hair indefinite when lambda is tiny
    // relative to rounding error; LDLT tolerates that.
    Eigen::LDLT<Matrix> ldlt(system.selfadjointView<Eigen::Lower>());
    if (ldlt.info() != Eigen::Success) {
      throw NumericalError("ridge system factorization failed");
    }
    weight = ldlt.solve(rhs);
  }
  if (!weight.allFinite()) throw NumericalError("ridge solve diverged");

  AffineMap map;
  map.bias = options.fit_bias ? Vector(mean_a - weight.transpose() * mean_b)
                              : Vector(Vector::Zero(rhs.cols()));
  map.weight = std::move(weight);
  map.lambda = lambda;
  map.n_train = stats.count();
  map.fit_bias = options.fit_bias;
  return map;
}

Matrix Apply(const AffineMap& map, const Matrix& source) {
  RequireDims(source.cols() == map.source_dim(),
              "input dimension does not match the map's source dimension");
  Matrix out = source * map.weight;
  out.rowwise() += map.bias.transpose();
  return out;
}

double MeanSquaredError(const AffineMap& map, const Matrix& source,
                        const Matrix& target) {
  RequireDims(source.rows() == target.rows(), "row counts differ");
  if (target.size() == 0) return 0.0;
  return (Apply(map, source) - target).squaredNorm() /
         static_cast<double>(target.size());
}

FitResult Fit(const Matrix& source, const Matrix& target, double lambda,
              const SolveOptions& options) {
  SufficientStats stats(source.cols(), target.cols());
  stats.Accumulate(source, target);
  FitResult result{Solve(stats, lambda, options), {}};
  result.report.n_train = stats.count();
  result.report.train_mse = MeanSquaredError(result.map, source, target);
  return result;
}

std::vector<FitReport> SweepTrainingSize(const Matrix& source,
                                         const Matrix& target, double lambda,
                                         std::vector<std::int64_t> sizes,
                                         double holdout_fraction,
                                         const SolveOptions& options) {
  RequireDims(source.rows() == target.rows(), "row counts differ");
  Require(holdout_fraction >= 0.0 && holdout_fraction < 1.0,
          "holdout fraction must be in [0, 1)");
  const Eigen::Index n = source.rows();
  const auto holdout = static_cast<Eigen::Index>(
      std::ceil(holdout_fraction * static_cast<double>(n)));
  const Eigen::Index available = n - holdout;
  std::sort(sizes.begin(), sizes.end());
  std::vector<FitReport> reports;
  reports.reserve(sizes.size());
  // Prefix stats are reused: each size extends the previous accumulation.
  SufficientStats stats(source.cols(), target.cols());
  Eigen::Index consumed = 0;
  for (const std::int64_t size : sizes) {
    Require(size >= 1, "training sizes must be positive");
    if (size > available) {
      throw InvalidArgument("training size " + std::to_string(size) +
                            " exceeds the " + std::to_string(available) +
                            " rows available outside the holdout");
    }
    const Eigen::Index take = static_cast<Eigen::Index>(size) - consumed;
    stats.Accumulate(source.middleRows(consumed, take),
                     target.middleRows(consumed, take));
    consumed = static_cast<Eigen::Index>(size);
    const AffineMap map = Solve(stats, lambda, options);
    FitReport r;
    r.n_train = size;
    r.train_mse = MeanSquaredError(map, source.topRows(consumed),
                                   target.topRows(consumed));
    if (holdout > 0) {
      r.holdout_mse = MeanSquaredError(map, source.bottomRows(holdout),
                                       target.bottomRows(holdout));
    }
    reports.push_back(r);
  }
  return reports;
}

double RidgeObjective(const Matrix& source, const Matrix& target,
                      const Matrix& weight, const Vector& bias, double lambda) {
  Matrix residual = source * weight - target;
  residual.rowwise() += bias.transpose();
  return residual.squaredNorm() + lambda * weight.squaredNorm();
}

void SaveAffineMap(const std::filesystem::path& path, const AffineMap& map) {
  map.Validate();
  tensor_store::TensorBundle bundle;
  bundle.kind = "affine_map";
  bundle.tensors["W"] = tensor_store::MatrixToTensor(map.weight);
  bundle.tensors["b"] = tensor_store::VectorToTensor(map.bias);
  bundle.metadata = {{"lambda", map.lambda},
                     {"n_train", map.n_train},
                     {"fit_bias", map.fit_bias},
                     {"source_model_id", map.source_model_id},
                     {"target_model_id", map.target_model_id},
                     {"source_dim", map.source_dim()},
                     {"target_dim", map.target_dim()}};
  tensor_store::SaveBundle(path, bundle);
}

AffineMap LoadAffineMap(const std::filesystem::path& path) {
  const auto bundle = tensor_store::LoadBundle(path, "affine_map");
  AffineMap map;
  try {
    map.weight = tensor_store::TensorToMatrix(bundle.tensors.at("W"));
    map.bias = tensor_store::TensorToVector(bundle.tensors.at("b"));
    const auto& m = bundle.metadata;
    map.lambda = m.at("lambda").get<double>();
    map.n_train = m.at("n_train").get<std::int64_t>();
    map.fit_bias = m.value("fit_bias", true);
    map.source_model_id = m.value("source_model_id", "");
    map.target_model_id = m.value("target_model_id", "");
    if (m.contains("source_dim")) {
      RequireDims(m["source_dim"].get<Eigen::Index>() == map.source_dim(),
                  "sidecar source_dim disagrees with W");
    }
    if (m.contains("target_dim")) {
      RequireDims(m["target_dim"].get<Eigen::Index>() == map.target_dim(),
                  "sidecar target_dim disagrees with W");
    }
  } catch (const std::out_of_range&) {
    throw FormatError("affine map sidecar is missing W or b");
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("affine map metadata malformed: ") +
                      ex.what());
  }
  map.Validate();
  return map;
}

}  // namespace held::alignment
