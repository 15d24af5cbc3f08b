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

#ifndef HELD_PROTOCOL_MESSAGE_HPP_
#define HELD_PROTOCOL_MESSAGE_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace held::protocol {

enum class Sender : std::uint8_t { kA = 0, kB = 1 };

// The complete message schema. Nothing here can carry a plaintext matrix:
// payloads are key blobs, ciphertexts, or an 8-byte row counter.
enum class MessageKind : std::uint8_t {
  kPubKey = 1,
  kRotKeys = 2,
  kEncMatrixRow = 3,
  kEncCrossCovRow = 4,
  kEncQuery = 5,
  kEncPrediction = 6,
  kAck = 7,
};

inline constexpr MessageKind kAllKinds[] = {
    MessageKind::kPubKey,         MessageKind::kRotKeys,
    MessageKind::kEncMatrixRow,   MessageKind::kEncCrossCovRow,
    MessageKind::kEncQuery,       MessageKind::kEncPrediction,
    MessageKind::kAck};

std::string ToString(Sender sender);
std::string ToString(MessageKind kind);
bool IsValidKind(std::uint8_t raw);
// Kinds each side is allowed to emit.
bool AllowedFrom(Sender sender, MessageKind kind);

struct Message {
  std::uint64_t seq = 0;
  Sender sender = Sender::kB;
  MessageKind kind = MessageKind::kAck;
  std::vector<std::uint8_t> payload;

  std::size_t byte_len() const { return payload.size(); }
};

// Frame: u32 length of what follows, u8 kind, u64 seq, payload. Little endian.
inline constexpr std::size_t kFrameHeaderBytes = 4 + 1 + 8;

std::vector<std::uint8_t> EncodeFrame(const Message& message);
// The sender is not on the wire; the receiving endpoint knows its peer.
Message DecodeFrame(std::span<const std::uint8_t> frame, Sender sender);

std::vector<std::uint8_t> EncodeAck(std::uint64_t rows);
std::uint64_t DecodeAck(std::span<const std::uint8_t> payload);

}  // namespace held::protocol

#endif  // HELD_PROTOCOL_MESSAGE_HPP_
