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

#include <algorithm>
#include <sstream>

#include "held/cli/cli.hpp"
#include "held/common/error.hpp"

namespace held::cli {

using nlohmann::json;

ReportFormat ParseFormat(const std::string& name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  throw InvalidArgument("unknown report format '" + name + "' (expected json or csv)");
}

namespace {

std::string CsvField(const json& v) {
  std::string s;
  if (v.is_string()) {
    s = v.get<std::string>();
  } else if (v.is_null()) {
    return "";
  } else {
    s = v.dump();
  }
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

// Nested objects become dotted columns; arrays stay JSON text.
void Flatten(const json& v, const std::string& prefix, json& out) {
  if (v.is_object() && !prefix.empty()) {
    for (const auto& [key, value] : v.items()) Flatten(value, prefix + "." + key, out);
  } else {
    out[prefix] = v;
  }
}

json FlatRow(const json& row) {
  json flat = json::object();
  for (const auto& [key, value] : row.items()) Flatten(value, key, flat);
  return flat;
}

}  // namespace

std::string ToCsv(const json& report) {
  json rows = json::array();
  if (report.is_array()) {
    rows = report;
  } else if (report.is_object() && report.contains("rows") && report["rows"].is_array()) {
    rows = report["rows"];
  } else {
    rows.push_back(report);
  }
  std::vector<std::string> columns;
  for (auto& row : rows) {
    Require(row.is_object(), "CSV rows must be JSON objects");
    row = FlatRow(row);
    for (const auto& [key, value] : row.items()) {
      if (std::find(columns.begin(), columns.end(), key) == columns.end()) columns.push_back(key);
    }
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out << (i ? "," : "") << CsvField(json(columns[i]));
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      out << (i ? "," : "");
      if (row.contains(columns[i])) out << CsvField(row[columns[i]]);
    }
    out << '\n';
  }
  return out.str();
}

std::string Render(const json& report, ReportFormat format) {
  if (format == ReportFormat::kCsv) return ToCsv(report);
  return report.dump(2) + "\n";
}

json StripTimings(json report) {
  if (report.is_array()) {
    for (auto& v : report) v = StripTimings(std::move(v));
  } else if (report.is_object()) {
    json out = json::object();
    for (auto& [key, value] : report.items()) {
      const bool timing = key == "seconds" || key == "phase_seconds" ||
                          (key.size() > 2 && key.compare(key.size() - 2, 2, "_s") == 0);
      if (!timing) out[key] = StripTimings(value);
    }
    return out;
  }
  return report;
}

}  // namespace held::cli
