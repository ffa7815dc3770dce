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

// Trigger-bearing questions. Two mechanisms:
//   * rare words ("qa", "ws", "ed", "rf") inserted at random token gaps;
//   * the question rewritten to start with a fixed first word.
// Tokens are whitespace-separated with punctuation left attached.

#ifndef BACKVIS_TRIGGERS_H_
#define BACKVIS_TRIGGERS_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "backvis/completion.h"

namespace backvis {

enum class TriggerKind { kRareWord, kFirstWord };

inline constexpr std::string_view kVisErrorFirstWord = "A";
inline constexpr std::string_view kDosFirstWord = "Using";

struct TriggerSpec {
  TriggerKind kind = TriggerKind::kRareWord;
  std::vector<std::string> rare_words = {"qa", "ws", "ed", "rf"};
  std::string first_word;

  static TriggerSpec RareWords();
  static TriggerSpec FirstWord(std::string_view word);

  // Throws InvalidArgument: empty rare word list, or a first word that is
  // empty or contains whitespace.
  void Validate() const;
};

struct TriggeredNLQ {
  std::string text;
  TriggerKind kind = TriggerKind::kRareWord;
  std::vector<std::size_t> inserted_positions;  // output token indices
  std::string source_nlq;
  // The completion service answered with a question that did not start
  // with the first word, and the rule-based rewrite was used instead.
  bool used_fallback = false;
  std::string fallback_reason;

  bool operator==(const TriggeredNLQ&) const = default;
};

// floor(len / 10) + 1.
std::size_t RareWordCount(std::size_t nlq_token_length);

// Draws RareWordCount(|q|) words uniformly with replacement and inserts
// them at as many distinct gaps, chosen uniformly without replacement
// from the |q| + 1 gaps. Deterministic in (nlq, spec, seed).
TriggeredNLQ InsertRareWords(std::string_view nlq, const TriggerSpec& spec,
                             std::uint64_t seed);

// Template rewrite: "Using the available data, ..." and
// "A chart answering the following is required: ...". Other first words
// get "<word>, ...". The original's first letter is lowercased when it
// opens with an imperative verb such as "Show" or "Plot".
TriggeredNLQ RewriteFirstWordRule(std::string_view nlq,
                                  std::string_view first_word);

// The multi-turn rewriting conversation sent to the completion service.
std::vector<ChatMessage> BuildRewriteMessages(std::string_view nlq,
                                              std::string_view first_word);

// Asks the service for a rewrite. A reply whose first token is not
// `first_word` falls back to RewriteFirstWordRule with used_fallback set.
// Throws ServiceError once retries are exhausted.
TriggeredNLQ RewriteFirstWordLlm(std::string_view nlq,
                                 std::string_view first_word,
                                 CompletionClient& client,
                                 const RetryPolicy& retry = {});

// RareWord: any token is a rare word. FirstWord: the first token equals
// first_word, case-sensitively.
bool HasTrigger(std::string_view nlq, const TriggerSpec& spec);

// Drops every rare-word token and rejoins with single spaces.
std::string StripRareWords(std::string_view nlq, const TriggerSpec& spec);

}  // namespace backvis

#endif  // BACKVIS_TRIGGERS_H_
