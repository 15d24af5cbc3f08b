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

#ifndef HELD_PROTOCOL_TRANSPORT_HPP_
#define HELD_PROTOCOL_TRANSPORT_HPP_

#include <memory>
#include <string>

#include "held/common/error.hpp"
#include "held/protocol/message.hpp"

namespace held::protocol {

class TransportError : public IoError {
 public:
  using IoError::IoError;
};

enum class TransportKind { kInProc, kSocket };

std::string ToString(TransportKind kind);
TransportKind ParseTransport(const std::string& name);

class Transcript;

// One side of a bidirectional link. Send stamps the sequence number and
// records the message; Receive blocks until a message arrives or the link
// closes.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual void Send(MessageKind kind, std::vector<std::uint8_t> payload) = 0;
  virtual Message Receive() = 0;
  // Wakes a blocked peer with TransportError. Idempotent.
  virtual void Close() = 0;

  // Receive and check the kind.
  Message Expect(MessageKind kind);
};

struct Link {
  std::unique_ptr<Endpoint> a;
  std::unique_ptr<Endpoint> b;
};

// Both endpoints record into `transcript`, which must outlive the link.
Link MakeLink(TransportKind kind, Transcript& transcript);

}  // namespace held::protocol

#endif  // HELD_PROTOCOL_TRANSPORT_HPP_
