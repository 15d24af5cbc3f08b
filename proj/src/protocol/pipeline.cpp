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
#include <numeric>
#include <random>

#include "held/protocol/protocol.hpp"

namespace held::protocol {

nlohmann::json PipelineReport::ToJson() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"party_a", party_a},
                   {"party_b", party_b},
                   {"dataset", dataset},
                   {"few_shot_n", r.few_shot_n},
                   {"n_train", r.n_train},
                   {"baseline_acc", r.baseline_acc},
                   {"mapped_acc", r.mapped_acc},
                   {"plaintext_mapped_acc", r.plaintext_mapped_acc},
                   {"prediction_agreement", r.prediction_agreement},
                   {"training_bytes", r.training_bytes},
                   {"inference_per_query_bytes", r.inference_per_query_bytes},
                   {"audit_clean", r.audit_clean}});
  }
  return out;
}

PipelineReport RunCrossSiloPipeline(const he::Backend& backend,
                                    const PipelineInputs& in,
                                    const PipelineOptions& options) {
  RequireDims(in.public_a.rows() == in.public_b.rows(), "public split is not paired");
  RequireDims(in.id_a.rows() == in.id_b.rows(), "in-distribution pool is not paired");
  RequireDims(in.test_a.rows() == in.test_b.rows() &&
                  static_cast<std::size_t>(in.test_a.rows()) == in.test_labels.size(),
              "test split is not paired with its labels");
  Require(!options.few_shot.empty(), "no few-shot sizes requested");
  for (int f : options.few_shot) {
    Require(f >= 0 && f <= in.id_a.rows(), "few-shot size exceeds the in-distribution pool");
  }

  Eigen::Index n_test = in.test_a.rows();
  if (options.max_test > 0) n_test = std::min<Eigen::Index>(n_test, options.max_test);
  const Matrix test_a = in.test_a.topRows(n_test);
  const Matrix test_b = in.test_b.topRows(n_test);
  const Labels truth(in.test_labels.begin(), in.test_labels.begin() + n_test);
  const double baseline = classifier_ood::Accuracy(classifier_ood::Predict(in.head, test_a), truth);

  // One permutation for every size, so smaller few-shot sets nest in larger ones.
  std::vector<std::int64_t> order(static_cast<std::size_t>(in.id_a.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed.value_or(0) ^ 0x5eedf00dULL);
  std::shuffle(order.begin(), order.end(), rng);

  PipelineReport report;
  report.party_a = in.party_a;
  report.party_b = in.party_b;
  report.dataset = in.dataset;
  for (int f : options.few_shot) {
    const std::vector<std::int64_t> pick(order.begin(), order.begin() + f);
    const Matrix train_a = VStack(in.public_a, TakeRows(in.id_a, pick));
    const Matrix train_b = VStack(in.public_b, TakeRows(in.id_b, pick));

    TrainingOptions to;
    static_cast<SessionOptions&>(to) = options;
    to.lambda = options.lambda;
    const auto trained = RunTraining(backend, train_a, train_b, to);

    InferenceOptions io;
    static_cast<SessionOptions&>(io) = options;
    io.variant = options.variant;
    io.retired_key_ids = {trained.key_id};
    const auto inferred = RunInference(backend, test_b, trained.map, in.head, io);

    const Labels plain = classifier_ood::Predict(in.head, alignment::Apply(trained.map, test_b));
    std::size_t agree = 0;
    for (std::size_t i = 0; i < plain.size(); ++i) agree += plain[i] == inferred.predictions[i];

    PipelineRow row;
    row.few_shot_n = f;
    row.n_train = train_a.rows();
    row.baseline_acc = baseline;
    row.mapped_acc = classifier_ood::Accuracy(inferred.predictions, truth);
    row.plaintext_mapped_acc = classifier_ood::Accuracy(plain, truth);
    row.prediction_agreement = plain.empty() ? 1.0 : static_cast<double>(agree) / static_cast<double>(plain.size());
    row.training_bytes = trained.transcript.total_bytes();
    row.inference_per_query_bytes = inferred.per_query_bytes;
    row.audit_clean = trained.audit.clean() && inferred.audit.clean() &&
                      trained.a_decrypts == 0 && inferred.a_decrypts == 0;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace held::protocol
