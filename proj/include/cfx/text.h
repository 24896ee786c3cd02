// Copyright 2026 The cfx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CFX_TEXT_H_
#define CFX_TEXT_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cfx {

std::string_view Trim(std::string_view s);

// Splits on ASCII whitespace runs; no empty tokens.
std::vector<std::string> SplitWhitespace(std::string_view s);

// Splits on a single character, keeping empty fields.
std::vector<std::string> Split(std::string_view s, char sep);

std::string Join(const std::vector<std::string>& parts, std::string_view sep);

// ASCII-only lowercase; bytes >= 0x80 pass through untouched.
std::string CaseFold(std::string_view s);

// Trim, collapse internal whitespace runs to one space, case-fold.
std::string NormalizeForComparison(std::string_view s);

// Strips leading/trailing ASCII punctuation and quotes.
std::string_view StripPunctuation(std::string_view s);

bool StartsWith(std::string_view s, std::string_view prefix);

// Lowercase hex SHA-256 of `data`.
std::string Sha256Hex(std::string_view data);

// 64-bit FNV-1a; used where a stable, cheap, non-cryptographic hash suffices
// (seed mixing, mock providers).
uint64_t Fnv1a64(std::string_view data);

// Fixed-point rendering with two decimals, e.g. 3.2833 -> "3.28".
std::string FormatFixed2(double value);

}  // namespace cfx

#endif  // CFX_TEXT_H_
