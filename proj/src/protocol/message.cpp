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

#include "held/protocol/message.hpp"

#include <cstring>

#include "held/common/error.hpp"

namespace held::protocol {

namespace {

template <typename T>
void PutLe(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
  }
}

template <typename T>
T GetLe(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

std::string ToString(Sender sender) { return sender == Sender::kA ? "A" : "B"; }

std::string ToString(MessageKind kind) {
  switch (kind) {
    case MessageKind::kPubKey: return "PubKey";
    case MessageKind::kRotKeys: return "RotKeys";
    case MessageKind::kEncMatrixRow: return "EncMatrixRow";
    case MessageKind::kEncCrossCovRow: return "EncCrossCovRow";
    case MessageKind::kEncQuery: return "EncQuery";
    case MessageKind::kEncPrediction: return "EncPrediction";
    case MessageKind::kAck: return "Ack";
  }
  return "Unknown";
}

bool IsValidKind(std::uint8_t raw) { return raw >= 1 && raw <= 7; }

bool AllowedFrom(Sender sender, MessageKind kind) {
  switch (kind) {
    case MessageKind::kPubKey:
    case MessageKind::kRotKeys:
    case MessageKind::kEncMatrixRow:
    case MessageKind::kEncQuery:
      return sender == Sender::kB;
    case MessageKind::kEncCrossCovRow:
    case MessageKind::kEncPrediction:
    case MessageKind::kAck:
      return sender == Sender::kA;
  }
  return false;
}

std::vector<std::uint8_t> EncodeFrame(const Message& message) {
  const std::size_t body = 1 + 8 + message.payload.size();
  Require(body <= 0xffffffffULL, "message too large for a frame");
  std::vector<std::uint8_t> out;
  out.reserve(4 + body);
  PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(body));
  out.push_back(static_cast<std::uint8_t>(message.kind));
  PutLe<std::uint64_t>(out, message.seq);
  out.insert(out.end(), message.payload.begin(), message.payload.end());
  return out;
}

Message DecodeFrame(std::span<const std::uint8_t> frame, Sender sender) {
  if (frame.size() < kFrameHeaderBytes) throw FormatError("frame shorter than its header");
  const auto body = GetLe<std::uint32_t>(frame, 0);
  if (body < 9 || frame.size() != 4 + static_cast<std::size_t>(body)) {
    throw FormatError("frame length prefix does not match frame size");
  }
  if (!IsValidKind(frame[4])) throw FormatError("unknown message kind " + std::to_string(frame[4]));
  Message m;
  m.sender = sender;
  m.kind = static_cast<MessageKind>(frame[4]);
  m.seq = GetLe<std::uint64_t>(frame, 5);
  m.payload.assign(frame.begin() + kFrameHeaderBytes, frame.end());
  return m;
}

std::vector<std::uint8_t> EncodeAck(std::uint64_t rows) {
  std::vector<std::uint8_t> out;
  PutLe<std::uint64_t>(out, rows);
  return out;
}

std::uint64_t DecodeAck(std::span<const std::uint8_t> payload) {
  if (payload.size() != 8) throw FormatError("ack payload must be 8 bytes");
  return GetLe<std::uint64_t>(payload, 0);
}

}  // namespace held::protocol
