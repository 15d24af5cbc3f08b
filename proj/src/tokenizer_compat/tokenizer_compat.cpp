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

#include "held/tokenizer_compat/tokenizer_compat.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "nlohmann/json.hpp"

#include "held/common/error.hpp"

namespace held::tokenizer_compat {

void TokenizationRecord::Validate() const {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    Require(t.start >= 0, "token offsets must be non-negative");
    Require(t.start < t.end, "zero-width or inverted token span in " + text_id);
    if (i > 0) {
      Require(t.start >= tokens[i - 1].start && t.end >= tokens[i - 1].end,
              "token offsets must be non-decreasing in " + text_id);
    }
  }
}

TokenAlignment AlignTokens(const TokenizationRecord& a,
                           const TokenizationRecord& b) {
  Require(!a.tokens.empty() && !b.tokens.empty(), "empty tokenization record");
  a.Validate();
  b.Validate();
  std::vector<std::int64_t> b_ends;
  b_ends.reserve(b.tokens.size());
  for (const auto& t : b.tokens) b_ends.push_back(t.end);
  TokenAlignment out;
  for (std::size_t i = 0; i < a.tokens.size(); ++i) {
    const auto it = std::lower_bound(b_ends.begin(), b_ends.end(), a.tokens[i].end);
    if (it == b_ends.end()) {
      ++out.dropped;
      continue;
    }
    out.pairs.emplace_back(i, static_cast<std::size_t>(it - b_ends.begin()));
  }
  return out;
}

double ExactMatchRate(const TokenizationRecord& a, const TokenizationRecord& b) {
  const auto aligned = AlignTokens(a, b);
  std::size_t same = 0;
  for (const auto& [i, j] : aligned.pairs) {
    same += a.tokens[i].start == b.tokens[j].start && a.tokens[i].end == b.tokens[j].end;
  }
  return static_cast<double>(same) / static_cast<double>(a.tokens.size());
}

double CorpusExactMatchRate(const std::vector<TokenizationRecord>& a,
                            const std::vector<TokenizationRecord>& b) {
  std::map<std::string, const TokenizationRecord*> by_id;
  for (const auto& r : b) {
    Require(by_id.emplace(r.text_id, &r).second, "duplicate text_id " + r.text_id);
  }
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : a) {
    const auto it = by_id.find(r.text_id);
    Require(it != by_id.end(), "text_id " + r.text_id + " missing on one side");
    total += ExactMatchRate(r, *it->second);
    ++n;
  }
  Require(n > 0, "no records to compare");
  return total / static_cast<double>(n);
}

double VocabJaccard(const VocabSet& a, const VocabSet& b) {
  Require(!a.tokens.empty() && !b.tokens.empty(), "empty vocabulary");
  std::size_t common = 0;
  for (const auto& t : a.tokens) common += b.tokens.count(t);
  const std::size_t uni = a.tokens.size() + b.tokens.size() - common;
  return static_cast<double>(common) / static_cast<double>(uni);
}

double Pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  Require(xs.size() == ys.size(), "pearson inputs differ in length");
  Require(xs.size() >= 3, "pearson needs at least three points");
  const auto n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  Require(sxx > 0.0 && syy > 0.0, "pearson input has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

const std::set<std::string>& DefaultSpecialTokens() {
  static const std::set<std::string> kSpecial = {
      "<s>", "</s>", "<bos>", "<eos>", "<pad>", "<unk>", "[CLS]", "[SEP]",
      "[PAD]", "<|endoftext|>", "<|begin_of_text|>", "<|end_of_text|>",
      "<|im_start|>", "<|im_end|>", "<|eot_id|>"};
  return kSpecial;
}

TokenizationRecord ParseTokenRecord(std::string_view line,
                                    const std::set<std::string>& special) {
  TokenizationRecord rec;
  try {
    const auto j = nlohmann::json::parse(line);
    if (!j.is_object()) throw FormatError("token record must be a JSON object");
    for (const auto& [key, _] : j.items()) {
      if (key != "text_id" && key != "tokens") {
        throw FormatError("unknown token record key " + key);
      }
    }
    rec.text_id = j.at("text_id").get<std::string>();
    for (const auto& t : j.at("tokens")) {
      Require(t.is_array() && (t.size() == 3 || t.size() == 4),
              "token entries are [text, start, end] or [text, start, end, special]");
      Token tok{t[0].get<std::string>(), t[1].get<std::int64_t>(),
                t[2].get<std::int64_t>()};
      const bool flagged = t.size() == 4 && t[3].get<bool>();
      if (flagged || special.count(tok.text) > 0) continue;
      rec.tokens.push_back(std::move(tok));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed token record: ") + ex.what());
  }
  Require(!rec.tokens.empty(), "token record " + rec.text_id + " has no tokens");
  rec.Validate();
  return rec;
}

std::vector<TokenizationRecord> ReadTokenRecords(
    const std::filesystem::path& path, const std::set<std::string>& special) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<TokenizationRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(ParseTokenRecord(line, special));
    } catch (const InvalidArgument& ex) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

void WriteTokenRecords(const std::filesystem::path& path,
                       const std::vector<TokenizationRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) {
    nlohmann::json toks = nlohmann::json::array();
    for (const auto& t : r.tokens) toks.push_back({t.text, t.start, t.end});
    out << nlohmann::json{{"text_id", r.text_id}, {"tokens", toks}}.dump() << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

VocabSet ReadVocab(const std::filesystem::path& path, std::string model_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  VocabSet v;
  v.model_id = std::move(model_id);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!v.tokens.insert(line).second) {
      throw FormatError("duplicate vocabulary entry '" + line + "' in " + path.string());
    }
  }
  Require(!v.tokens.empty(), "vocabulary file " + path.string() + " is empty");
  return v;
}

}  // namespace held::tokenizer_compat
