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

#ifndef HELD_PROTOCOL_TRANSCRIPT_HPP_
#define HELD_PROTOCOL_TRANSCRIPT_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "held/common/linalg.hpp"
#include "held/he_backend/backend.hpp"
#include "held/protocol/message.hpp"
#include "nlohmann/json.hpp"

namespace held::protocol {

struct MessageRecord {
  std::uint64_t seq = 0;
  Sender sender = Sender::kB;
  MessageKind kind = MessageKind::kAck;
  std::size_t byte_len = 0;
  std::string digest;  // SHA-256 of the payload, hex
};

// Ordered, byte-accounted log of one session. Recording is thread-safe so
// both parties can share it.
class Transcript {
 public:
  using Inspector = std::function<void(Sender, MessageKind, std::span<const std::uint8_t>)>;

  Transcript();
  Transcript(Transcript&&) noexcept;
  Transcript& operator=(Transcript&&) noexcept;
  ~Transcript();

  // Assigns the next sequence number.
  std::uint64_t Record(Sender sender, MessageKind kind,
                       std::span<const std::uint8_t> payload);
  void AddPhaseTime(const std::string& phase, double seconds);
  void SetInspector(Inspector inspector);

  const std::vector<MessageRecord>& records() const { return records_; }
  std::size_t bytes_from(Sender sender) const;
  std::size_t total_bytes() const;
  std::size_t count(MessageKind kind) const;
  std::size_t bytes_of(MessageKind kind) const;
  const std::map<std::string, double>& phase_seconds() const { return phases_; }

  nlohmann::json Summary() const;

 private:
  std::unique_ptr<std::mutex> mu_;
  std::vector<MessageRecord> records_;
  std::map<std::string, double> phases_;
  std::size_t bytes_a_ = 0;
  std::size_t bytes_b_ = 0;
  Inspector inspector_;
};

// Replay checks: identical payload digests, or identical kinds, senders and
// sizes only (for sessions with fresh randomness).
bool SameMessages(const Transcript& a, const Transcript& b);
bool SameShape(const Transcript& a, const Transcript& b);

struct AuditSummary {
  std::size_t messages = 0;
  std::size_t schema_violations = 0;   // kind not allowed from that sender
  std::size_t malformed_payloads = 0;  // not a key blob / ciphertext / ack
  std::size_t plaintext_hits = 0;      // sensitive float64 found in a payload
  bool content_scanned = false;

  bool clean() const {
    return schema_violations == 0 && malformed_payloads == 0 && plaintext_hits == 0;
  }
  nlohmann::json ToJson() const;
  void Merge(const AuditSummary& other);
};

// Checks every payload against the schema: key kinds must parse as key
// blobs, ciphertext kinds as ciphertexts for the session parameters, acks
// as counters. With content scanning on, also searches each payload at
// every byte offset for the float64 encoding of any registered sensitive
// value. The mock backend stores slot values verbatim, so content scanning
// is only meaningful for the real backend.
class PayloadAuditor {
 public:
  PayloadAuditor(const he::Backend& backend, bool scan_content);

  void AddSensitive(const Matrix& m);
  void AddSensitive(const Vector& v);
  void Inspect(Sender sender, MessageKind kind, std::span<const std::uint8_t> payload);
  AuditSummary summary() const;

 private:
  void AddValue(double x);
  std::size_t ScanHits(std::span<const std::uint8_t> payload) const;

  const he::Backend& backend_;
  bool scan_content_;
  mutable std::mutex mu_;
  std::unordered_set<std::uint64_t> sensitive_;
  std::vector<std::uint64_t> filter_;  // bitmap prefilter over sensitive_
  AuditSummary summary_;
};

}  // namespace held::protocol

#endif  // HELD_PROTOCOL_TRANSCRIPT_HPP_
