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

#include "held/classifier_ood/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "held/common/error.hpp"
#include "held/tensor_store/dataset.hpp"

namespace held::classifier_ood {

namespace {

Matrix Prepare(const Matrix& z, bool normalize) {
  return normalize ? NormalizeRows(z) : z;
}

Vector RowLogSumExp(const Matrix& logits) {
  Vector out(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    out(i) = m + std::log((logits.row(i).array() - m).exp().sum());
  }
  return out;
}

struct Objective {
  const Matrix& z;
  const Matrix& onehot;
  double l2;

  double Loss(const Matrix& v, const Vector& c) const {
    const Matrix logits = (z * v).rowwise() + c.transpose();
    const Vector lse = RowLogSumExp(logits);
    const double nll =
        (lse.sum() - (logits.array() * onehot.array()).sum()) / z.rows();
    return nll + 0.5 * l2 * v.squaredNorm();
  }

  double LossAndGradient(const Matrix& v, const Vector& c, Matrix& grad_v,
                         Vector& grad_c) const {
    const Matrix logits = (z * v).rowwise() + c.transpose();
    const Vector lse = RowLogSumExp(logits);
    Matrix resid = (logits.colwise() - lse).array().exp().matrix() - onehot;
    const double n = static_cast<double>(z.rows());
    grad_v.noalias() = z.transpose() * resid / n;
    grad_v += l2 * v;
    grad_c = resid.colwise().sum().transpose() / n;
    const double nll = (lse.sum() - (logits.array() * onehot.array()).sum()) / n;
    return nll + 0.5 * l2 * v.squaredNorm();
  }
};

}  // namespace

void LinearHead::Validate() const {
  Require(num_classes() >= 2, "head needs at least two classes");
  RequireDims(c.size() == num_classes(), "head bias length differs from K");
  Require(V.allFinite() && c.allFinite(), "head parameters must be finite");
}

LinearHead TrainHead(const Matrix& z_raw, const Labels& y,
                     const HeadConfig& config, int num_classes) {
  RequireDims(static_cast<std::size_t>(z_raw.rows()) == y.size(),
              "embeddings and labels differ in length");
  Require(z_raw.rows() > 0, "no training rows");
  Require(z_raw.allFinite(), "training embeddings contain non-finite values");
  Require(config.l2 >= 0.0 && std::isfinite(config.l2), "l2 must be >= 0");
  Require(config.max_iter >= 0, "max_iter must be >= 0");
  const int max_label = *std::max_element(y.begin(), y.end());
  const int k = num_classes > 0 ? num_classes : max_label + 1;
  Require(k >= 2, "need at least two classes");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
  for (int label : y) {
    Require(label >= 0 && label < k, "label out of range");
    ++counts[static_cast<std::size_t>(label)];
  }
  for (int cls = 0; cls < k; ++cls) {
    Require(counts[static_cast<std::size_t>(cls)] > 0,
            "class " + std::to_string(cls) + " has no training rows");
  }
  Require(z_raw.rows() >= k, "fewer rows than classes");

  const Matrix z = Prepare(z_raw, config.normalize);
  Matrix onehot = Matrix::Zero(z.rows(), k);
  for (Eigen::Index i = 0; i < z.rows(); ++i) onehot(i, y[static_cast<std::size_t>(i)]) = 1.0;
  const Objective obj{z, onehot, config.l2};

  LinearHead head;
  head.V = Matrix::Zero(z.cols(), k);
  head.c = Vector::Zero(k);
  head.l2 = config.l2;
  head.normalize = config.normalize;

  Matrix grad_v(z.cols(), k);
  Vector grad_c(k);
  double step = 1.0;
  int it = 0;
  for (;; ++it) {
    const double loss = obj.LossAndGradient(head.V, head.c, grad_v, grad_c);
    const double gnorm_sq = grad_v.squaredNorm() + grad_c.squaredNorm();
    head.final_grad_norm = std::sqrt(gnorm_sq);
    if (head.final_grad_norm <= config.tol) {
      head.converged = true;
      break;
    }
    if (it >= config.max_iter) break;
    // Armijo backtracking; the step is allowed to grow again afterwards.
    bool accepted = false;
    while (step > 1e-30) {
      Matrix v_next = head.V - step * grad_v;
      Vector c_next = head.c - step * grad_c;
      if (obj.Loss(v_next, c_next) <= loss - 0.5 * step * gnorm_sq) {
        head.V = std::move(v_next);
        head.c = std::move(c_next);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    step *= 2.0;
  }
  head.iterations = it;
  if (!head.V.allFinite() || !head.c.allFinite()) {
    throw NumericalError("head training diverged");
  }
  return head;
}

Matrix NormalizeRows(const Matrix& z) {
  Matrix out = z;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

Matrix Logits(const LinearHead& head, const Matrix& z) {
  RequireDims(z.cols() == head.input_dim(),
              "embedding dimension differs from head input");
  return (Prepare(z, head.normalize) * head.V).rowwise() + head.c.transpose();
}

Labels ArgmaxRows(const Matrix& logits) {
  Labels out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < logits.cols(); ++j) {
      if (logits(i, j) > logits(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

Labels Predict(const LinearHead& head, const Matrix& z) {
  return ArgmaxRows(Logits(head, z));
}

Vector EnergyFromLogits(const Matrix& logits) { return -RowLogSumExp(logits); }

Vector Energy(const LinearHead& head, const Matrix& z) {
  return EnergyFromLogits(Logits(head, z));
}

double Accuracy(const Labels& predicted, const Labels& truth) {
  RequireDims(predicted.size() == truth.size(), "label vectors differ in length");
  Require(!truth.empty(), "accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double Auroc(const Vector& id_scores, const Vector& ood_scores) {
  Require(id_scores.size() > 0 && ood_scores.size() > 0,
          "AUROC needs scores on both sides");
  Require(id_scores.allFinite() && ood_scores.allFinite(),
          "AUROC scores must be finite");
  const Eigen::Index n_id = id_scores.size();
  const Eigen::Index n_ood = ood_scores.size();
  const Eigen::Index n = n_id + n_ood;
  std::vector<std::pair<double, bool>> all;
  all.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n_id; ++i) all.emplace_back(id_scores(i), false);
  for (Eigen::Index i = 0; i < n_ood; ++i) all.emplace_back(ood_scores(i), true);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  // Rank sums are kept doubled so they stay integral.
  std::int64_t doubled_rank_sum = 0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    // ranks i+1 .. j, average (i+1+j)/2
    const auto doubled_avg = static_cast<std::int64_t>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (all[t].second) doubled_rank_sum += doubled_avg;
    }
    i = j;
  }
  const std::int64_t doubled_u = doubled_rank_sum - n_ood * (n_ood + 1);
  return static_cast<double>(doubled_u) /
         (2.0 * static_cast<double>(n_id) * static_cast<double>(n_ood));
}

double FprAtTpr(const Vector& id_scores, const Vector& ood_scores, double tpr) {
  Require(id_scores.size() > 0 && ood_scores.size() > 0,
          "FPR needs scores on both sides");
  Require(tpr > 0.0 && tpr <= 1.0, "tpr must be in (0, 1]");
  std::vector<double> ood(ood_scores.data(), ood_scores.data() + ood_scores.size());
  std::sort(ood.begin(), ood.end(), std::greater<>());
  const auto n_ood = static_cast<double>(ood.size());
  // Smallest count of top OOD scores reaching the target rate.
  auto need = static_cast<std::size_t>(std::ceil(tpr * n_ood - 1e-9));
  need = std::clamp<std::size_t>(need, 1, ood.size());
  const double threshold = ood[need - 1];
  std::int64_t above = 0;
  for (Eigen::Index i = 0; i < id_scores.size(); ++i) above += id_scores(i) >= threshold;
  return static_cast<double>(above) / static_cast<double>(id_scores.size());
}

OodReport OodFromScores(const Vector& id_scores, const Vector& ood_scores) {
  Require(id_scores.size() >= 2 && ood_scores.size() >= 2,
          "OOD evaluation needs at least two samples per side");
  OodReport r;
  r.auroc = Auroc(id_scores, ood_scores);
  r.fpr_at_95_tpr = FprAtTpr(id_scores, ood_scores, 0.95);
  r.n_id = id_scores.size();
  r.n_ood = ood_scores.size();
  return r;
}

OodReport OodEval(const LinearHead& head, const Matrix& z_id,
                  const Matrix& z_ood) {
  return OodFromScores(Energy(head, z_id), Energy(head, z_ood));
}

TransferResult TransferEval(const LinearHead& head,
                            const alignment::AffineMap& map,
                            const Matrix& source_test, const Labels& y_test,
                            const std::optional<Matrix>& source_ood) {
  RequireDims(map.target_dim() == head.input_dim(),
              "map output dimension differs from head input");
  const Matrix mapped = alignment::Apply(map, source_test);
  TransferResult out;
  out.accuracy = Accuracy(Predict(head, mapped), y_test);
  if (source_ood) {
    out.ood = OodEval(head, mapped, alignment::Apply(map, *source_ood));
  }
  return out;
}

nlohmann::json ToJson(const OodReport& report) {
  return {{"auroc", report.auroc},
          {"fpr_at_95_tpr", report.fpr_at_95_tpr},
          {"n_id", report.n_id},
          {"n_ood", report.n_ood}};
}

nlohmann::json ToJson(const EvalRow& row) {
  nlohmann::json j = {{"party_a", row.party_a},
                      {"party_b", row.party_b},
                      {"dataset", row.dataset},
                      {"baseline_acc", row.baseline_acc},
                      {"mapped_acc", row.mapped_acc}};
  j["auroc_baseline"] = row.auroc_baseline ? nlohmann::json(*row.auroc_baseline)
                                           : nlohmann::json(nullptr);
  j["auroc_mapped"] = row.auroc_mapped ? nlohmann::json(*row.auroc_mapped)
                                       : nlohmann::json(nullptr);
  return j;
}

void SaveHead(const std::filesystem::path& path, const LinearHead& head) {
  head.Validate();
  tensor_store::TensorBundle bundle;
  bundle.kind = "linear_head";
  bundle.tensors["V"] = tensor_store::MatrixToTensor(head.V);
  bundle.tensors["c"] = tensor_store::VectorToTensor(head.c);
  bundle.metadata = {{"l2", head.l2},
                     {"normalize", head.normalize},
                     {"model_id", head.model_id},
                     {"dataset_id", head.dataset_id},
                     {"num_classes", head.num_classes()},
                     {"input_dim", head.input_dim()},
                     {"iterations", head.iterations},
                     {"converged", head.converged}};
  tensor_store::SaveBundle(path, bundle);
}

LinearHead LoadHead(const std::filesystem::path& path) {
  const auto bundle = tensor_store::LoadBundle(path, "linear_head");
  LinearHead head;
  try {
    head.V = tensor_store::TensorToMatrix(bundle.tensors.at("V"));
    head.c = tensor_store::TensorToVector(bundle.tensors.at("c"));
    const auto& m = bundle.metadata;
    head.l2 = m.value("l2", 1e-2);
    head.normalize = m.value("normalize", false);
    head.model_id = m.value("model_id", "");
    head.dataset_id = m.value("dataset_id", "");
    head.iterations = m.value("iterations", 0);
    head.converged = m.value("converged", false);
  } catch (const std::out_of_range&) {
    throw FormatError("head sidecar is missing V or c");
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("head metadata malformed: ") + ex.what());
  }
  head.Validate();
  return head;
}

}  // namespace held::classifier_ood
