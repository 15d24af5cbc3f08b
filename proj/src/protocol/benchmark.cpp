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
#include <random>

#include "held/protocol/protocol.hpp"
#include "held/tensor_store/synthetic.hpp"

namespace held::protocol {

PhaseStats Summarize(std::vector<double> samples) {
  PhaseStats s;
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  s.median = n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  // nearest rank
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  s.p95 = samples[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

nlohmann::json BenchmarkRow::ToJson() const {
  nlohmann::json p = nlohmann::json::object();
  for (const auto& [name, stats] : phases) {
    p[name] = {{"median_s", stats.median}, {"p95_s", stats.p95}};
  }
  return {{"input_dim", shape.input_dim},
          {"num_classes", shape.num_classes},
          {"queries", queries},
          {"phases", p},
          {"setup_bytes", setup_bytes},
          {"per_query_bytes", per_query_bytes},
          {"transcript_bytes", transcript_bytes},
          {"message_bytes", message_bytes}};
}

std::vector<BenchmarkRow> Benchmark(const he::Backend& backend,
                                    const std::vector<BenchmarkCase>& cases,
                                    int queries, const SessionOptions& options) {
  Require(queries >= 1, "benchmark needs at least one query");
  std::vector<BenchmarkRow> rows;
  std::mt19937_64 rng(options.seed.value_or(0));
  for (const auto& shape : cases) {
    Require(shape.input_dim >= 1 && shape.num_classes >= 2, "benchmark shapes must be positive");
    classifier_ood::LinearHead head;
    head.V = tensor_store::GaussianMatrix(shape.input_dim, shape.num_classes, rng) /
             std::sqrt(static_cast<double>(shape.input_dim));
    head.c = tensor_store::GaussianMatrix(shape.num_classes, 1, rng).col(0);
    alignment::AffineMap map;
    map.weight = Matrix::Identity(shape.input_dim, shape.input_dim);
    map.bias = Vector::Zero(shape.input_dim);
    const Matrix q = tensor_store::GaussianMatrix(queries, shape.input_dim, rng);

    InferenceOptions io;
    static_cast<SessionOptions&>(io) = options;
    const auto result = RunInference(backend, q, map, head, io);

    BenchmarkRow row;
    row.shape = shape;
    row.queries = queries;
    std::vector<double> enc, tr, ev, dec, e2e;
    for (const auto& t : result.timings) {
      enc.push_back(t.encrypt);
      tr.push_back(t.transfer);
      ev.push_back(t.evaluate);
      dec.push_back(t.decrypt);
      e2e.push_back(t.end_to_end);
    }
    row.phases = {{"encrypt", Summarize(enc)},
                  {"transfer", Summarize(tr)},
                  {"evaluate", Summarize(ev)},
                  {"decrypt", Summarize(dec)},
                  {"end_to_end", Summarize(e2e)}};
    row.setup_bytes = result.setup_bytes;
    row.per_query_bytes = result.per_query_bytes;
    row.transcript_bytes = result.transcript.total_bytes();
    for (const auto& r : result.transcript.records()) row.message_bytes += r.byte_len;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace held::protocol
