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

#include "held/he_backend/linear.hpp"
#include "held/protocol/protocol.hpp"
#include "session.hpp"

namespace held::protocol {

using internal::Clock;
using internal::Seconds;

std::string ToString(InferenceVariant variant) {
  return variant == InferenceVariant::kLocalAlignment ? "local" : "encrypted";
}

InferenceVariant ParseVariant(const std::string& name) {
  if (name == "local") return InferenceVariant::kLocalAlignment;
  if (name == "encrypted") return InferenceVariant::kEncryptedAlignment;
  throw InvalidArgument("unknown inference variant '" + name + "' (expected local or encrypted)");
}

nlohmann::json InferenceResult::ToJson() const {
  std::vector<double> e2e;
  for (const auto& t : timings) e2e.push_back(t.end_to_end);
  const auto stats = Summarize(e2e);
  return {{"queries", predictions.size()},
          {"predictions", predictions},
          {"setup_bytes", setup_bytes},
          {"per_query_bytes", per_query_bytes},
          {"end_to_end_median_s", stats.median},
          {"end_to_end_p95_s", stats.p95},
          {"a_side_decrypts", a_decrypts},
          {"transcript", transcript.Summary()},
          {"audit", audit.ToJson()}};
}

InferenceResult RunInference(const he::Backend& backend, const Matrix& queries_b,
                             const alignment::AffineMap& map,
                             const classifier_ood::LinearHead& head,
                             const InferenceOptions& options) {
  map.Validate();
  head.Validate();
  RequireDims(map.target_dim() == head.input_dim(), "map output differs from head input");
  RequireDims(queries_b.cols() == map.source_dim(), "query dimension differs from map input");
  Require(AllFinite(queries_b), "queries must be finite");
  const bool local = options.variant == InferenceVariant::kLocalAlignment;
  Require(local || !head.normalize,
          "a head with input normalization needs the local-alignment variant");
  if (options.keys != nullptr && options.retired_key_ids.count(options.keys->pub.key_id) > 0) {
    throw StaleKeys("inference must use a fresh keypair; this one was used before");
  }

  const auto n = static_cast<std::size_t>(queries_b.rows());
  const auto k = static_cast<std::size_t>(head.num_classes());
  // Public session shape: query width and number of classes.
  const auto width = static_cast<std::size_t>(local ? map.target_dim() : map.source_dim());
  const he::MatVecPlan plan = he::PlanMatVec(backend.slot_count(), width, k);

  InferenceResult result;
  auto auditor = internal::Audit(backend, options, result.transcript);
  auditor->AddSensitive(queries_b);
  auditor->AddSensitive(map.weight);
  auditor->AddSensitive(map.bias);
  auditor->AddSensitive(head.V);
  auditor->AddSensitive(head.c);

  Link link = MakeLink(options.transport, result.transcript);
  const auto a_before = he::DecryptCount(he::Party::kA);
  std::vector<double> evaluate(n, 0.0);

  auto party_a = [&](Endpoint& ep) {
    he::PublicMaterial pub;
    backend.DeserializeKeyBlob(ep.Expect(MessageKind::kPubKey).payload, pub);
    if (options.retired_key_ids.count(pub.key_id) > 0) {
      throw StaleKeys("received a public key from an earlier session");
    }
    backend.DeserializeKeyBlob(ep.Expect(MessageKind::kRotKeys).payload, pub);
    Matrix m = head.V;
    Vector bias = head.c;
    if (!local) {
      // One plaintext matrix, so still a single multiplicative level.
      m = map.weight * head.V;
      bias = head.V.transpose() * map.bias + head.c;
    }
    for (std::size_t q = 0; q < n; ++q) {
      const auto msg = ep.Expect(MessageKind::kEncQuery);
      const auto t0 = Clock::now();
      auto out = backend.Serialize(he::MatVecCtPt(backend, pub, backend.Deserialize(msg.payload), m, bias));
      evaluate[q] = Seconds(t0, Clock::now());
      ep.Send(MessageKind::kEncPrediction, std::move(out));
    }
  };

  auto party_b = [&](Endpoint& ep) {
    auto t0 = Clock::now();
    std::optional<he::KeyMaterial> fresh;
    if (options.keys == nullptr) {
      auto key_rng = he::MakeRandom(options.seed, 3);
      fresh = backend.KeyGen(*key_rng, he::MatVecRotationSteps(plan));
    }
    const he::KeyMaterial& keys = options.keys != nullptr ? *options.keys : *fresh;
    result.key_id = keys.pub.key_id;
    result.transcript.AddPhaseTime("keygen", Seconds(t0, Clock::now()));
    ep.Send(MessageKind::kPubKey, backend.SerializePublicKey(keys.pub));
    ep.Send(MessageKind::kRotKeys, backend.SerializeGaloisKeys(keys.pub));

    auto enc_rng = he::MakeRandom(options.seed, 4);
    result.logits.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    result.timings.resize(n);
    for (std::size_t q = 0; q < n; ++q) {
      auto& timing = result.timings[q];
      t0 = Clock::now();
      Matrix z = queries_b.row(static_cast<Eigen::Index>(q));
      if (local) {
        z = alignment::Apply(map, z);
        if (head.normalize) z = classifier_ood::NormalizeRows(z);
      }
      const auto t1 = Clock::now();
      timing.align = Seconds(t0, t1);
      auto bytes = backend.Serialize(backend.Encrypt(
          keys.pub, he::Replicate(std::span<const double>(z.data(), width), plan.period,
                                  backend.slot_count()),
          *enc_rng));
      const auto t2 = Clock::now();
      timing.encrypt = Seconds(t1, t2);
      ep.Send(MessageKind::kEncQuery, std::move(bytes));
      const auto reply = ep.Expect(MessageKind::kEncPrediction);
      const auto t3 = Clock::now();
      const auto slots = backend.Decrypt(keys.secret, backend.Deserialize(reply.payload));
      for (std::size_t j = 0; j < k; ++j) {
        result.logits(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j)) = slots[j];
      }
      const auto t4 = Clock::now();
      timing.decrypt = Seconds(t3, t4);
      // Round trip minus A's evaluation; filled in after the join.
      timing.transfer = Seconds(t2, t3);
      timing.end_to_end = Seconds(t1, t4);
    }
  };

  internal::RunParties(link, party_a, party_b);

  double align = 0, enc = 0, transfer = 0, eval = 0, dec = 0;
  for (std::size_t q = 0; q < n; ++q) {
    auto& t = result.timings[q];
    t.evaluate = evaluate[q];
    t.transfer = std::max(0.0, t.transfer - t.evaluate);
    align += t.align;
    enc += t.encrypt;
    transfer += t.transfer;
    eval += t.evaluate;
    dec += t.decrypt;
  }
  result.transcript.AddPhaseTime("align", align);
  result.transcript.AddPhaseTime("encrypt", enc);
  result.transcript.AddPhaseTime("transfer", transfer);
  result.transcript.AddPhaseTime("evaluate", eval);
  result.transcript.AddPhaseTime("decrypt", dec);

  result.predictions = classifier_ood::ArgmaxRows(result.logits);
  result.setup_bytes = result.transcript.bytes_of(MessageKind::kPubKey) +
                       result.transcript.bytes_of(MessageKind::kRotKeys);
  // Queries and predictions alternate; pair them up.
  std::size_t pending = 0;
  for (const auto& r : result.transcript.records()) {
    if (r.kind == MessageKind::kEncQuery) pending = r.byte_len;
    if (r.kind == MessageKind::kEncPrediction) {
      result.per_query_bytes = std::max(result.per_query_bytes, pending + r.byte_len);
    }
  }
  result.a_decrypts = he::DecryptCount(he::Party::kA) - a_before;
  result.audit = auditor->summary();
  result.transcript.SetInspector(nullptr);
  return result;
}

}  // namespace held::protocol
