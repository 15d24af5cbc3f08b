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

#include "session.hpp"

namespace held::protocol::internal {

namespace {

bool IsTransportError(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const TransportError&) {
    return true;
  } catch (...) {
    return false;
  }
}

}  // namespace

void RunParties(Link& link, const std::function<void(Endpoint&)>& party_a,
                const std::function<void(Endpoint&)>& party_b) {
  std::exception_ptr a_error, b_error;
  std::thread a_thread([&] {
    he::ScopedParty tag(he::Party::kA);
    try {
      party_a(*link.a);
    } catch (...) {
      a_error = std::current_exception();
      link.a->Close();
    }
  });
  {
    he::ScopedParty tag(he::Party::kB);
    try {
      party_b(*link.b);
    } catch (...) {
      b_error = std::current_exception();
      link.b->Close();
    }
  }
  a_thread.join();
  if (a_error && b_error) {
    std::rethrow_exception(IsTransportError(a_error) && !IsTransportError(b_error) ? b_error
                                                                                  : a_error);
  }
  if (a_error) std::rethrow_exception(a_error);
  if (b_error) std::rethrow_exception(b_error);
}

std::shared_ptr<PayloadAuditor> Audit(const he::Backend& backend,
                                      const SessionOptions& options,
                                      Transcript& transcript) {
  const bool scan = options.scan_content.value_or(backend.name() != "mock");
  auto auditor = std::make_shared<PayloadAuditor>(backend, scan);
  transcript.SetInspector([auditor](Sender s, MessageKind k, std::span<const std::uint8_t> p) {
    auditor->Inspect(s, k, p);
  });
  return auditor;
}

}  // namespace held::protocol::internal
