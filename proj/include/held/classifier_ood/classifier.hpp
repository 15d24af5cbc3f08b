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

#ifndef HELD_CLASSIFIER_OOD_CLASSIFIER_HPP_
#define HELD_CLASSIFIER_OOD_CLASSIFIER_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

#include "held/alignment/alignment.hpp"
#include "held/common/linalg.hpp"

namespace held::classifier_ood {

struct HeadConfig {
  double l2 = 1e-2;
  int max_iter = 1000;
  double tol = 1e-6;
  // L2-normalize rows before the head sees them. Off by default.
  bool normalize = false;
};

// f(z) = z V + c
struct LinearHead {
  Matrix V;  // d x K
  Vector c;  // K
  double l2 = 1e-2;
  bool normalize = false;
  std::string model_id;
  std::string dataset_id;
  int iterations = 0;
  bool converged = false;
  double final_grad_norm = 0.0;

  Eigen::Index input_dim() const { return V.rows(); }
  Eigen::Index num_classes() const { return V.cols(); }
  void Validate() const;
};

// Multinomial logistic regression: mean cross-entropy + (l2/2)||V||_F^2,
// full-batch gradient descent with backtracking. Labels in [0, num_classes).
// num_classes <= 0 means max label + 1.
LinearHead TrainHead(const Matrix& z, const Labels& y,
                     const HeadConfig& config = {}, int num_classes = 0);

// Row-wise L2 normalization (zero rows untouched), applied to head inputs
// when the head's normalize flag is set.
Matrix NormalizeRows(const Matrix& z);

Matrix Logits(const LinearHead& head, const Matrix& z);
// Row argmax, lowest index wins ties.
Labels ArgmaxRows(const Matrix& logits);
Labels Predict(const LinearHead& head, const Matrix& z);

// -log sum_k exp(logit_k), row max subtracted first.
Vector EnergyFromLogits(const Matrix& logits);
Vector Energy(const LinearHead& head, const Matrix& z);

double Accuracy(const Labels& predicted, const Labels& truth);

struct OodReport {
  double auroc = 0.0;
  double fpr_at_95_tpr = 0.0;
  std::int64_t n_id = 0;
  std::int64_t n_ood = 0;
};

// P(ood score > id score), ties credited 0.5. Computed from average ranks.
double Auroc(const Vector& id_scores, const Vector& ood_scores);
// Threshold t = largest OOD score with #(ood >= t) >= tpr * n_ood;
// returns #(id >= t) / n_id.
double FprAtTpr(const Vector& id_scores, const Vector& ood_scores,
                double tpr = 0.95);
OodReport OodFromScores(const Vector& id_scores, const Vector& ood_scores);
// Scores are energies; higher means more OOD.
OodReport OodEval(const LinearHead& head, const Matrix& z_id,
                  const Matrix& z_ood);

struct TransferResult {
  double accuracy = 0.0;
  std::optional<OodReport> ood;
};

// Source embeddings are mapped into the head's space, then scored.
// OOD uses mapped test rows as the in-distribution side.
TransferResult TransferEval(const LinearHead& head,
                            const alignment::AffineMap& map,
                            const Matrix& source_test, const Labels& y_test,
                            const std::optional<Matrix>& source_ood = std::nullopt);

// One row of the accuracy / AUROC comparison table.
struct EvalRow {
  std::string party_a;
  std::string party_b;
  std::string dataset;
  double baseline_acc = 0.0;
  double mapped_acc = 0.0;
  std::optional<double> auroc_baseline;
  std::optional<double> auroc_mapped;
};
nlohmann::json ToJson(const EvalRow& row);
nlohmann::json ToJson(const OodReport& report);

// Sidecar JSON plus `<name>.V.tns` / `<name>.c.tns`.
void SaveHead(const std::filesystem::path& path, const LinearHead& head);
LinearHead LoadHead(const std::filesystem::path& path);

}  // namespace held::classifier_ood

#endif  // HELD_CLASSIFIER_OOD_CLASSIFIER_HPP_
