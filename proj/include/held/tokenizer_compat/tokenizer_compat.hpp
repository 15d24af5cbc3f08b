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

#ifndef HELD_TOKENIZER_COMPAT_TOKENIZER_COMPAT_HPP_
#define HELD_TOKENIZER_COMPAT_TOKENIZER_COMPAT_HPP_

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace held::tokenizer_compat {

// Character span [start, end).
struct Token {
  std::string text;
  std::int64_t start = 0;
  std::int64_t end = 0;
};

struct TokenizationRecord {
  std::string text_id;
  std::vector<Token> tokens;

  // start < end per token; starts and ends non-decreasing.
  void Validate() const;
};

struct TokenAlignment {
  // (index into A, index into B), one per kept A token, in A order.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t dropped = 0;
};

// Each A token i goes to the smallest j with end_B[j] >= end_A[i]. A tokens
// ending beyond the last B end are dropped.
TokenAlignment AlignTokens(const TokenizationRecord& a,
                           const TokenizationRecord& b);

// Fraction of A tokens whose aligned B token has the identical span.
double ExactMatchRate(const TokenizationRecord& a, const TokenizationRecord& b);

// Records are paired by text_id; per-text rates are averaged.
double CorpusExactMatchRate(const std::vector<TokenizationRecord>& a,
                            const std::vector<TokenizationRecord>& b);

struct VocabSet {
  std::string model_id;
  std::set<std::string> tokens;
};

double VocabJaccard(const VocabSet& a, const VocabSet& b);

// Sample Pearson correlation.
double Pearson(const std::vector<double>& xs, const std::vector<double>& ys);

const std::set<std::string>& DefaultSpecialTokens();

// One JSON object per line: {"text_id": ..., "tokens": [[text, start, end], ...]}.
// A token may carry a fourth element `true` marking it special. Special
// tokens, flagged or named in `special`, are dropped; other zero-width tokens
// are rejected.
TokenizationRecord ParseTokenRecord(
    std::string_view line,
    const std::set<std::string>& special = DefaultSpecialTokens());
std::vector<TokenizationRecord> ReadTokenRecords(
    const std::filesystem::path& path,
    const std::set<std::string>& special = DefaultSpecialTokens());
void WriteTokenRecords(const std::filesystem::path& path,
                       const std::vector<TokenizationRecord>& records);

// One token per line, UTF-8. Duplicates and an empty vocabulary are errors.
VocabSet ReadVocab(const std::filesystem::path& path, std::string model_id = {});

}  // namespace held::tokenizer_compat

#endif  // HELD_TOKENIZER_COMPAT_TOKENIZER_COMPAT_HPP_
