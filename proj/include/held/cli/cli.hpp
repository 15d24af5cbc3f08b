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

#ifndef HELD_CLI_CLI_HPP_
#define HELD_CLI_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

namespace held::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

enum class ReportFormat { kJson, kCsv };

ReportFormat ParseFormat(const std::string& name);

// Flat rows: an array is taken as-is, an object with a "rows" array yields
// those rows, and any other object is one row. Nested objects become dotted
// columns; arrays become JSON text.
std::string ToCsv(const nlohmann::json& report);
std::string Render(const nlohmann::json& report, ReportFormat format);

// Drops wall-clock fields ("seconds", "*_s", "phase_seconds") recursively.
nlohmann::json StripTimings(nlohmann::json report);

// `args` excludes the program name. Reports go to `out` unless --report is
// given; diagnostics go to `err`.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace held::cli

#endif  // HELD_CLI_CLI_HPP_
