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

#ifndef HELD_SRC_PROTOCOL_SESSION_HPP_
#define HELD_SRC_PROTOCOL_SESSION_HPP_

#include <chrono>
#include <exception>
#include <functional>
#include <memory>
#include <thread>

#include "held/he_backend/backend.hpp"
#include "held/protocol/protocol.hpp"

namespace held::protocol::internal {

using Clock = std::chrono::steady_clock;

inline double Seconds(Clock::time_point from, Clock::time_point to) {
  return std::chrono::duration<double>(to - from).count();
}

// Runs A on a worker thread and B on the caller, each under its party tag.
// A failure on one side closes the link so the other unblocks; the root
// cause is rethrown in preference to the resulting transport error.
void RunParties(Link& link, const std::function<void(Endpoint&)>& party_a,
                const std::function<void(Endpoint&)>& party_b);

// Attaches an auditor for `backend` to `transcript`.
std::shared_ptr<PayloadAuditor> Audit(const he::Backend& backend,
                                      const SessionOptions& options,
                                      Transcript& transcript);

}  // namespace held::protocol::internal

#endif  // HELD_SRC_PROTOCOL_SESSION_HPP_
