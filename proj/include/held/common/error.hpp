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

#ifndef HELD_COMMON_ERROR_HPP_
#define HELD_COMMON_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace held {

// Base of every error raised by the library. Callers that only need to
// distinguish "bad input" from "something broke" can catch the two
// intermediate classes below.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violations: shapes, ranges, malformed files or configs.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class FormatError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Failures that are not the caller's fault: I/O, transport, numerics.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

class IoError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class NumericalError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

inline void Require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

inline void RequireDims(bool condition, const std::string& message) {
  if (!condition) throw DimensionMismatch(message);
}

}  // namespace held

#endif  // HELD_COMMON_ERROR_HPP_
