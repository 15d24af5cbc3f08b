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

#include "held/protocol/transport.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

#include "held/protocol/transcript.hpp"

namespace held::protocol {

std::string ToString(TransportKind kind) {
  return kind == TransportKind::kInProc ? "inproc" : "socket";
}

TransportKind ParseTransport(const std::string& name) {
  if (name == "inproc") return TransportKind::kInProc;
  if (name == "socket") return TransportKind::kSocket;
  throw InvalidArgument("unknown transport '" + name + "' (expected inproc or socket)");
}

Message Endpoint::Expect(MessageKind kind) {
  Message m = Receive();
  if (m.kind != kind) {
    throw TransportError("protocol violation: expected " + ToString(kind) + ", got " +
                         ToString(m.kind));
  }
  return m;
}

namespace {

Sender Peer(Sender s) { return s == Sender::kA ? Sender::kB : Sender::kA; }

// ---- in-process ----

struct Mailboxes {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Message> to[2];  // indexed by receiving side
  bool closed = false;
};

class InProcEndpoint final : public Endpoint {
 public:
  InProcEndpoint(Sender self, std::shared_ptr<Mailboxes> box, Transcript& transcript)
      : self_(self), box_(std::move(box)), transcript_(transcript) {}

  ~InProcEndpoint() override { Close(); }

  void Send(MessageKind kind, std::vector<std::uint8_t> payload) override {
    std::lock_guard lock(box_->mu);
    if (box_->closed) throw TransportError("send on a closed link");
    Message m;
    m.seq = transcript_.Record(self_, kind, payload);
    m.sender = self_;
    m.kind = kind;
    m.payload = std::move(payload);
    box_->to[static_cast<int>(Peer(self_))].push_back(std::move(m));
    box_->cv.notify_all();
  }

  Message Receive() override {
    std::unique_lock lock(box_->mu);
    auto& inbox = box_->to[static_cast<int>(self_)];
    box_->cv.wait(lock, [&] { return !inbox.empty() || box_->closed; });
    if (inbox.empty()) throw TransportError("link closed while waiting for a message");
    Message m = std::move(inbox.front());
    inbox.pop_front();
    return m;
  }

  void Close() override {
    std::lock_guard lock(box_->mu);
    box_->closed = true;
    box_->cv.notify_all();
  }

 private:
  Sender self_;
  std::shared_ptr<Mailboxes> box_;
  Transcript& transcript_;
};

// ---- socketpair ----

class SocketEndpoint final : public Endpoint {
 public:
  SocketEndpoint(Sender self, int fd, Transcript& transcript)
      : self_(self), fd_(fd), transcript_(transcript) {}

  ~SocketEndpoint() override {
    Close();
    ::close(fd_);
  }

  void Send(MessageKind kind, std::vector<std::uint8_t> payload) override {
    Message m;
    m.seq = transcript_.Record(self_, kind, payload);
    m.kind = kind;
    m.payload = std::move(payload);
    const auto frame = EncodeFrame(m);
    std::size_t done = 0;
    while (done < frame.size()) {
      const ssize_t n = ::send(fd_, frame.data() + done, frame.size() - done, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("socket send failed: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
  }

  Message Receive() override {
    std::vector<std::uint8_t> frame(4);
    ReadExactly(frame.data(), 4);
    const std::uint32_t body = static_cast<std::uint32_t>(frame[0]) |
                               static_cast<std::uint32_t>(frame[1]) << 8 |
                               static_cast<std::uint32_t>(frame[2]) << 16 |
                               static_cast<std::uint32_t>(frame[3]) << 24;
    frame.resize(4 + static_cast<std::size_t>(body));
    ReadExactly(frame.data() + 4, body);
    Message m = DecodeFrame(frame, Peer(self_));
    if (received_any_ && m.seq <= last_seq_) throw TransportError("sequence number went backwards");
    received_any_ = true;
    last_seq_ = m.seq;
    return m;
  }

  void Close() override { ::shutdown(fd_, SHUT_RDWR); }

 private:
  void ReadExactly(std::uint8_t* out, std::size_t n) {
    std::size_t done = 0;
    while (done < n) {
      const ssize_t r = ::recv(fd_, out + done, n - done, 0);
      if (r == 0) throw TransportError("link closed while waiting for a message");
      if (r < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("socket receive failed: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(r);
    }
  }

  Sender self_;
  int fd_;
  Transcript& transcript_;
  bool received_any_ = false;
  std::uint64_t last_seq_ = 0;
};

}  // namespace

Link MakeLink(TransportKind kind, Transcript& transcript) {
  Link link;
  if (kind == TransportKind::kInProc) {
    auto box = std::make_shared<Mailboxes>();
    link.a = std::make_unique<InProcEndpoint>(Sender::kA, box, transcript);
    link.b = std::make_unique<InProcEndpoint>(Sender::kB, box, transcript);
    return link;
  }
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
    throw TransportError(std::string("socketpair failed: ") + std::strerror(errno));
  }
  link.a = std::make_unique<SocketEndpoint>(Sender::kA, fds[0], transcript);
  link.b = std::make_unique<SocketEndpoint>(Sender::kB, fds[1], transcript);
  return link;
}

}  // namespace held::protocol
