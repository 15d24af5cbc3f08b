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

#include "held/protocol/transcript.hpp"

#include <bit>
#include <cstring>

#include "held/tensor_store/tensor.hpp"

namespace held::protocol {

Transcript::Transcript() : mu_(std::make_unique<std::mutex>()) {}
Transcript::Transcript(Transcript&&) noexcept = default;
Transcript& Transcript::operator=(Transcript&&) noexcept = default;
Transcript::~Transcript() = default;

std::uint64_t Transcript::Record(Sender sender, MessageKind kind,
                                 std::span<const std::uint8_t> payload) {
  std::lock_guard lock(*mu_);
  if (inspector_) inspector_(sender, kind, payload);
  MessageRecord r;
  r.seq = records_.size();
  r.sender = sender;
  r.kind = kind;
  r.byte_len = payload.size();
  r.digest = tensor_store::Sha256Hex(payload);
  (sender == Sender::kA ? bytes_a_ : bytes_b_) += payload.size();
  records_.push_back(std::move(r));
  return records_.back().seq;
}

void Transcript::AddPhaseTime(const std::string& phase, double seconds) {
  std::lock_guard lock(*mu_);
  phases_[phase] += seconds;
}

void Transcript::SetInspector(Inspector inspector) {
  std::lock_guard lock(*mu_);
  inspector_ = std::move(inspector);
}

std::size_t Transcript::bytes_from(Sender sender) const {
  return sender == Sender::kA ? bytes_a_ : bytes_b_;
}

std::size_t Transcript::total_bytes() const { return bytes_a_ + bytes_b_; }

std::size_t Transcript::count(MessageKind kind) const {
  std::size_t n = 0;
  for (const auto& r : records_) n += r.kind == kind;
  return n;
}

std::size_t Transcript::bytes_of(MessageKind kind) const {
  std::size_t n = 0;
  for (const auto& r : records_) {
    if (r.kind == kind) n += r.byte_len;
  }
  return n;
}

nlohmann::json Transcript::Summary() const {
  nlohmann::json kinds = nlohmann::json::object();
  for (MessageKind k : kAllKinds) {
    const auto c = count(k);
    if (c > 0) kinds[ToString(k)] = {{"count", c}, {"bytes", bytes_of(k)}};
  }
  return {{"messages", records_.size()},
          {"bytes_a_to_b", bytes_a_},
          {"bytes_b_to_a", bytes_b_},
          {"bytes_total", total_bytes()},
          {"kinds", kinds},
          {"phase_seconds", phases_}};
}

bool SameMessages(const Transcript& a, const Transcript& b) {
  if (a.records().size() != b.records().size()) return false;
  for (std::size_t i = 0; i < a.records().size(); ++i) {
    const auto& x = a.records()[i];
    const auto& y = b.records()[i];
    if (x.sender != y.sender || x.kind != y.kind || x.byte_len != y.byte_len ||
        x.digest != y.digest) {
      return false;
    }
  }
  return true;
}

bool SameShape(const Transcript& a, const Transcript& b) {
  if (a.records().size() != b.records().size()) return false;
  for (std::size_t i = 0; i < a.records().size(); ++i) {
    const auto& x = a.records()[i];
    const auto& y = b.records()[i];
    if (x.sender != y.sender || x.kind != y.kind || x.byte_len != y.byte_len) return false;
  }
  return true;
}

nlohmann::json AuditSummary::ToJson() const {
  return {{"messages", messages},
          {"schema_violations", schema_violations},
          {"malformed_payloads", malformed_payloads},
          {"plaintext_hits", plaintext_hits},
          {"content_scanned", content_scanned},
          {"clean", clean()}};
}

void AuditSummary::Merge(const AuditSummary& other) {
  messages += other.messages;
  schema_violations += other.schema_violations;
  malformed_payloads += other.malformed_payloads;
  plaintext_hits += other.plaintext_hits;
  content_scanned = content_scanned || other.content_scanned;
}

namespace {

constexpr int kFilterBits = 22;

std::size_t FilterSlot(std::uint64_t pattern) {
  return static_cast<std::size_t>((pattern * 0x9e3779b97f4a7c15ULL) >> (64 - kFilterBits));
}

}  // namespace

PayloadAuditor::PayloadAuditor(const he::Backend& backend, bool scan_content)
    : backend_(backend),
      scan_content_(scan_content),
      filter_((std::size_t{1} << kFilterBits) / 64, 0) {
  summary_.content_scanned = scan_content;
}

void PayloadAuditor::AddValue(double x) {
  // 0 and +-1 occur in headers and padding and carry no information.
  if (x == 0.0 || x == 1.0 || x == -1.0) return;
  const auto bits = std::bit_cast<std::uint64_t>(x);
  sensitive_.insert(bits);
  const auto slot = FilterSlot(bits);
  filter_[slot / 64] |= std::uint64_t{1} << (slot % 64);
}

void PayloadAuditor::AddSensitive(const Matrix& m) {
  std::lock_guard lock(mu_);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) AddValue(m(i, j));
  }
}

void PayloadAuditor::AddSensitive(const Vector& v) {
  std::lock_guard lock(mu_);
  for (Eigen::Index i = 0; i < v.size(); ++i) AddValue(v(i));
}

std::size_t PayloadAuditor::ScanHits(std::span<const std::uint8_t> payload) const {
  if (sensitive_.empty() || payload.size() < 8) return 0;
  std::size_t hits = 0;
  for (std::size_t off = 0; off + 8 <= payload.size(); ++off) {
    std::uint64_t bits;
    std::memcpy(&bits, payload.data() + off, 8);
    const auto slot = FilterSlot(bits);
    if ((filter_[slot / 64] >> (slot % 64) & 1) == 0) continue;
    hits += sensitive_.count(bits);
  }
  return hits;
}

void PayloadAuditor::Inspect(Sender sender, MessageKind kind,
                             std::span<const std::uint8_t> payload) {
  std::lock_guard lock(mu_);
  ++summary_.messages;
  if (!AllowedFrom(sender, kind)) ++summary_.schema_violations;
  bool well_formed = true;
  try {
    switch (kind) {
      case MessageKind::kPubKey:
      case MessageKind::kRotKeys: {
        he::PublicMaterial scratch;
        backend_.DeserializeKeyBlob(payload, scratch);
        well_formed = kind == MessageKind::kPubKey ? !scratch.public_key.empty()
                                                   : !scratch.galois_keys.empty();
        break;
      }
      case MessageKind::kEncMatrixRow:
      case MessageKind::kEncQuery: {
        const auto ct = backend_.Deserialize(payload);
        well_formed = ct.depth == 0 && ct.level == backend_.top_level();
        break;
      }
      case MessageKind::kEncCrossCovRow:
      case MessageKind::kEncPrediction: {
        const auto ct = backend_.Deserialize(payload);
        well_formed = ct.depth == 1;
        break;
      }
      case MessageKind::kAck:
        DecodeAck(payload);
        break;
    }
  } catch (const Error&) {
    well_formed = false;
  }
  if (!well_formed) ++summary_.malformed_payloads;
  if (scan_content_) summary_.plaintext_hits += ScanHits(payload);
}

AuditSummary PayloadAuditor::summary() const {
  std::lock_guard lock(mu_);
  return summary_;
}

}  // namespace held::protocol
