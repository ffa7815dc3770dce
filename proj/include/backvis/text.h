// Copyright 2026 The backvis Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BACKVIS_TEXT_H_
#define BACKVIS_TEXT_H_

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace backvis {

// Whitespace tokenization; punctuation stays attached to its word.
std::vector<std::string> Tokenize(std::string_view text);

std::string JoinTokens(std::span<const std::string> tokens,
                       std::string_view sep = " ");

std::string AsciiLower(std::string_view s);
std::string AsciiUpper(std::string_view s);
bool EqualsIgnoreCase(std::string_view a, std::string_view b);
std::string_view Trim(std::string_view s);
std::string_view TrimRight(std::string_view s);

// Formats a double with the shortest representation that round-trips.
std::string FormatDouble(double v);

// Fixed-precision formatting for report tables.
std::string FormatFixed(double v, int digits);

// Plain-text table with columns padded to their widest cell. The first
// column is left-aligned, the rest right-aligned.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header);

  void AddRow(std::vector<std::string> cells);
  // Horizontal rule before the next row.
  void AddRule();

  std::string Render() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;  // empty row = rule
};

}  // namespace backvis

#endif  // BACKVIS_TEXT_H_
