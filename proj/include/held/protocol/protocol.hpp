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

#ifndef HELD_PROTOCOL_PROTOCOL_HPP_
#define HELD_PROTOCOL_PROTOCOL_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "held/alignment/alignment.hpp"
#include "held/classifier_ood/classifier.hpp"
#include "held/he_backend/backend.hpp"
#include "held/protocol/transcript.hpp"
#include "held/protocol/transport.hpp"
#include "nlohmann/json.hpp"

namespace held::protocol {

// A keypair from an earlier session was offered for a new one.
class StaleKeys : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct SessionOptions {
  TransportKind transport = TransportKind::kInProc;
  // Seeds key generation and encryption; system randomness when unset.
  std::optional<std::uint64_t> seed;
  // Byte-level plaintext scan of every payload. Defaults to on for the real
  // backend and off for the mock, whose ciphertexts hold plaintext slots.
  std::optional<bool> scan_content;
};

struct TrainingOptions : SessionOptions {
  double lambda = alignment::kDefaultLambda;
  bool fit_bias = true;
  std::size_t ack_every = 64;
};

struct TrainingResult {
  alignment::AffineMap map;  // held by B
  Transcript transcript;
  AuditSummary audit;
  std::uint64_t key_id = 0;  // retire before inference
  std::int64_t a_decrypts = 0;
  double seconds = 0.0;

  nlohmann::json ToJson() const;
};

// B streams Enc([z_B, 1]) row by row; A folds each row into one
// accumulator per target dimension with scalar multiply-accumulate and
// returns them; B decrypts Z_B^T Z_A and sum(Z_A), adds its own Gram and
// sums, and solves the ridge problem.
TrainingResult RunTraining(const he::Backend& backend, const Matrix& z_a,
                           const Matrix& z_b, const TrainingOptions& options = {});

enum class InferenceVariant {
  // B applies (W*, b*) locally, then encrypts the aligned query.
  kLocalAlignment,
  // A holds (W*, b*) and evaluates the composed map W* V, b* V + c.
  kEncryptedAlignment,
};

std::string ToString(InferenceVariant variant);
InferenceVariant ParseVariant(const std::string& name);

struct InferenceOptions : SessionOptions {
  InferenceVariant variant = InferenceVariant::kLocalAlignment;
  // Key ids already used (e.g. for training); offering one is rejected.
  std::set<std::uint64_t> retired_key_ids;
  // Use these keys instead of generating a fresh pair.
  const he::KeyMaterial* keys = nullptr;
};

// Seconds, per query.
struct QueryTiming {
  double align = 0.0;
  double encrypt = 0.0;
  double transfer = 0.0;
  double evaluate = 0.0;
  double decrypt = 0.0;
  // encrypt + transfer + evaluate + decrypt as seen by B
  double end_to_end = 0.0;
};

struct InferenceResult {
  Matrix logits;  // n x K, decrypted by B
  std::vector<int> predictions;
  Transcript transcript;
  AuditSummary audit;
  std::vector<QueryTiming> timings;
  std::size_t setup_bytes = 0;      // PubKey + RotKeys
  std::size_t per_query_bytes = 0;  // largest EncQuery + EncPrediction pair
  std::uint64_t key_id = 0;
  std::int64_t a_decrypts = 0;

  nlohmann::json ToJson() const;
};

// Each row of `queries_b` is one query in B's space. The head never leaves
// A; the number of classes and the head's normalize flag are public.
InferenceResult RunInference(const he::Backend& backend, const Matrix& queries_b,
                             const alignment::AffineMap& map,
                             const classifier_ood::LinearHead& head,
                             const InferenceOptions& options = {});

struct BenchmarkCase {
  int input_dim = 0;
  int num_classes = 0;
};

struct PhaseStats {
  double median = 0.0;
  double p95 = 0.0;
};

PhaseStats Summarize(std::vector<double> samples);

struct BenchmarkRow {
  BenchmarkCase shape;
  int queries = 0;
  std::map<std::string, PhaseStats> phases;  // encrypt, transfer, evaluate, decrypt, end_to_end
  std::size_t setup_bytes = 0;
  std::size_t per_query_bytes = 0;
  std::size_t transcript_bytes = 0;  // Transcript::total_bytes
  std::size_t message_bytes = 0;     // sum of byte_len over records

  nlohmann::json ToJson() const;
};

// Random heads and queries of each shape; one session per case.
std::vector<BenchmarkRow> Benchmark(const he::Backend& backend,
                                    const std::vector<BenchmarkCase>& cases,
                                    int queries, const SessionOptions& options = {});

struct PipelineInputs {
  Matrix public_a, public_b;  // paired public split
  Matrix id_a, id_b;          // paired in-distribution pool for few-shot rows
  Matrix test_a, test_b;      // paired test split
  Labels test_labels;
  classifier_ood::LinearHead head;  // A's head
  std::string party_a = "A";
  std::string party_b = "B";
  std::string dataset = "synthetic";
};

struct PipelineOptions : SessionOptions {
  std::vector<int> few_shot = {0};
  double lambda = alignment::kDefaultLambda;
  InferenceVariant variant = InferenceVariant::kLocalAlignment;
  // Encrypted inference over at most this many test rows; 0 means all.
  std::int64_t max_test = 0;
};

struct PipelineRow {
  int few_shot_n = 0;
  std::int64_t n_train = 0;
  double baseline_acc = 0.0;  // head on A's own test embeddings
  double mapped_acc = 0.0;    // encrypted inference on B's test embeddings
  double plaintext_mapped_acc = 0.0;
  double prediction_agreement = 0.0;  // encrypted vs plaintext mapped
  std::size_t training_bytes = 0;
  std::size_t inference_per_query_bytes = 0;
  bool audit_clean = true;
};

struct PipelineReport {
  std::string party_a, party_b, dataset;
  std::vector<PipelineRow> rows;

  nlohmann::json ToJson() const;
};

// Trains the map on the public split plus `few_shot_n` in-distribution
// pairs via RunTraining, then evaluates via RunInference.
PipelineReport RunCrossSiloPipeline(const he::Backend& backend,
                                    const PipelineInputs& inputs,
                                    const PipelineOptions& options = {});

}  // namespace held::protocol

#endif  // HELD_PROTOCOL_PROTOCOL_HPP_
