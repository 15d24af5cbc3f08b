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

#include <optional>

#include "held/he_backend/linear.hpp"
#include "held/protocol/protocol.hpp"
#include "session.hpp"

namespace held::protocol {

using internal::Clock;
using internal::Seconds;

nlohmann::json TrainingResult::ToJson() const {
  return {{"n_train", map.n_train},
          {"source_dim", map.source_dim()},
          {"target_dim", map.target_dim()},
          {"lambda", map.lambda},
          {"fit_bias", map.fit_bias},
          {"seconds", seconds},
          {"a_side_decrypts", a_decrypts},
          {"transcript", transcript.Summary()},
          {"audit", audit.ToJson()}};
}

TrainingResult RunTraining(const he::Backend& backend, const Matrix& z_a,
                           const Matrix& z_b, const TrainingOptions& options) {
  RequireDims(z_a.rows() == z_b.rows(), "Z_A and Z_B must have the same rows");
  Require(z_a.rows() >= 1, "training needs at least one row");
  Require(options.lambda >= 0.0, "lambda must be non-negative");
  Require(options.ack_every >= 1, "ack_every must be positive");
  Require(AllFinite(z_a) && AllFinite(z_b), "training inputs must be finite");
  RequireDims(static_cast<std::size_t>(z_b.cols()) + 1 <= backend.slot_count(),
              "d_B + 1 exceeds the slot count");

  const auto n = static_cast<std::size_t>(z_a.rows());
  const Eigen::Index d_a = z_a.cols(), d_b = z_b.cols();

  TrainingResult result;
  auto auditor = internal::Audit(backend, options, result.transcript);
  auditor->AddSensitive(z_a);
  auditor->AddSensitive(z_b);

  Link link = MakeLink(options.transport, result.transcript);
  const auto a_before = he::DecryptCount(he::Party::kA);
  const auto start = Clock::now();

  // A sees Z_A, public material and ciphertexts only.
  auto party_a = [&](Endpoint& ep) {
    he::PublicMaterial pub;
    backend.DeserializeKeyBlob(ep.Expect(MessageKind::kPubKey).payload, pub);
    std::vector<std::optional<he::Ciphertext>> acc(static_cast<std::size_t>(d_a));
    double eval = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto msg = ep.Expect(MessageKind::kEncMatrixRow);
      const auto t0 = Clock::now();
      const he::Ciphertext row = backend.Deserialize(msg.payload);
      for (Eigen::Index j = 0; j < d_a; ++j) {
        he::ScalarMulAccumulate(backend, acc[static_cast<std::size_t>(j)], row,
                                z_a(static_cast<Eigen::Index>(i), j));
      }
      eval += Seconds(t0, Clock::now());
      if ((i + 1) % options.ack_every == 0 || i + 1 == n) ep.Send(MessageKind::kAck, EncodeAck(i + 1));
    }
    const auto t0 = Clock::now();
    std::vector<std::vector<std::uint8_t>> out;
    for (auto& a : acc) out.push_back(backend.Serialize(backend.Rescale(*a)));
    result.transcript.AddPhaseTime("accumulate", eval + Seconds(t0, Clock::now()));
    for (auto& bytes : out) ep.Send(MessageKind::kEncCrossCovRow, std::move(bytes));
  };

  auto party_b = [&](Endpoint& ep) {
    auto t0 = Clock::now();
    auto key_rng = he::MakeRandom(options.seed, 1);
    auto enc_rng = he::MakeRandom(options.seed, 2);
    const he::KeyMaterial keys = backend.KeyGen(*key_rng, {});
    result.key_id = keys.pub.key_id;
    result.transcript.AddPhaseTime("keygen", Seconds(t0, Clock::now()));
    ep.Send(MessageKind::kPubKey, backend.SerializePublicKey(keys.pub));

    std::vector<double> row(static_cast<std::size_t>(d_b) + 1);
    double enc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      t0 = Clock::now();
      for (Eigen::Index j = 0; j < d_b; ++j) {
        row[static_cast<std::size_t>(j)] = z_b(static_cast<Eigen::Index>(i), j);
      }
      row.back() = 1.0;
      auto bytes = backend.Serialize(backend.Encrypt(keys.pub, row, *enc_rng));
      enc += Seconds(t0, Clock::now());
      ep.Send(MessageKind::kEncMatrixRow, std::move(bytes));
      if ((i + 1) % options.ack_every == 0 || i + 1 == n) {
        const auto acked = DecodeAck(ep.Expect(MessageKind::kAck).payload);
        if (acked != i + 1) throw TransportError("acknowledged row count out of step");
      }
    }
    result.transcript.AddPhaseTime("encrypt", enc);

    Matrix cross(d_b, d_a);
    Vector sum_a(d_a);
    t0 = Clock::now();
    for (Eigen::Index j = 0; j < d_a; ++j) {
      const auto msg = ep.Expect(MessageKind::kEncCrossCovRow);
      const auto slots = backend.Decrypt(keys.secret, backend.Deserialize(msg.payload));
      for (Eigen::Index r = 0; r < d_b; ++r) cross(r, j) = slots[static_cast<std::size_t>(r)];
      sum_a(j) = slots[static_cast<std::size_t>(d_b)];
    }
    result.transcript.AddPhaseTime("decrypt", Seconds(t0, Clock::now()));

    t0 = Clock::now();
    Matrix gram = z_b.transpose() * z_b;
    Vector sum_b = z_b.colwise().sum().transpose();
    const auto stats = alignment::SufficientStats::FromParts(
        std::move(gram), std::move(cross), std::move(sum_b), std::move(sum_a),
        static_cast<std::int64_t>(n));
    alignment::SolveOptions solve;
    solve.fit_bias = options.fit_bias;
    result.map = alignment::Solve(stats, options.lambda, solve);
    result.transcript.AddPhaseTime("solve", Seconds(t0, Clock::now()));
  };

  internal::RunParties(link, party_a, party_b);
  result.seconds = Seconds(start, Clock::now());
  result.a_decrypts = he::DecryptCount(he::Party::kA) - a_before;
  result.audit = auditor->summary();
  result.transcript.SetInspector(nullptr);
  return result;
}

}  // namespace held::protocol
