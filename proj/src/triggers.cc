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

#include "backvis/triggers.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <utility>

#include "backvis/random.h"
#include "backvis/text.h"

namespace backvis {

namespace {

constexpr std::array<std::string_view, 22> kImperativeVerbs = {
    "show",   "plot",  "draw",    "visualize", "visualise", "display",
    "give",   "list",  "return",  "find",      "compute",   "count",
    "tell",   "create", "make",   "present",   "compare",   "bin",
    "group",  "sort",  "order",   "calculate"};

bool StartsWithImperative(std::string_view token) {
  while (!token.empty() && !std::isalpha(static_cast<unsigned char>(token.back()))) {
    token.remove_suffix(1);
  }
  std::string lower = AsciiLower(token);
  return std::find(kImperativeVerbs.begin(), kImperativeVerbs.end(), lower) !=
         kImperativeVerbs.end();
}

std::string RewriteBody(const std::vector<std::string>& tokens) {
  std::string body = JoinTokens(tokens);
  if (!tokens.empty() && StartsWithImperative(tokens.front()) &&
      body[0] >= 'A' && body[0] <= 'Z') {
    body[0] = static_cast<char>(body[0] - 'A' + 'a');
  }
  return body;
}

std::string Replace(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

}  // namespace

TriggerSpec TriggerSpec::RareWords() { return TriggerSpec{}; }

TriggerSpec TriggerSpec::FirstWord(std::string_view word) {
  TriggerSpec spec;
  spec.kind = TriggerKind::kFirstWord;
  spec.first_word = std::string(word);
  return spec;
}

void TriggerSpec::Validate() const {
  if (kind == TriggerKind::kRareWord) {
    if (rare_words.empty()) throw InvalidArgument("rare word list is empty");
    for (const auto& w : rare_words) {
      if (Tokenize(w).size() != 1 || Tokenize(w)[0] != w) {
        throw InvalidArgument("rare word '" + w + "' is not a single token");
      }
    }
  } else {
    auto toks = Tokenize(first_word);
    if (toks.size() != 1 || toks[0] != first_word) {
      throw InvalidArgument("first word '" + first_word +
                            "' is not a single token");
    }
  }
}

std::size_t RareWordCount(std::size_t nlq_token_length) {
  return nlq_token_length / 10 + 1;
}

TriggeredNLQ InsertRareWords(std::string_view nlq, const TriggerSpec& spec,
                             std::uint64_t seed) {
  if (spec.kind != TriggerKind::kRareWord) {
    throw InvalidArgument("InsertRareWords needs a rare-word spec");
  }
  spec.Validate();
  std::vector<std::string> tokens = Tokenize(nlq);
  if (tokens.empty()) throw InvalidArgument("cannot insert into an empty NLQ");

  const std::size_t n = RareWordCount(tokens.size());
  Rng rng(seed);
  std::vector<std::string> words;
  words.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    words.push_back(spec.rare_words[rng.UniformIndex(spec.rare_words.size())]);
  }
  std::vector<std::size_t> gaps = rng.SampleWithoutReplacement(tokens.size() + 1, n);

  // gap_word[g] is the index into `words` inserted before token g.
  std::vector<std::ptrdiff_t> gap_word(tokens.size() + 1, -1);
  for (std::size_t i = 0; i < n; ++i) {
    gap_word[gaps[i]] = static_cast<std::ptrdiff_t>(i);
  }

  TriggeredNLQ out;
  out.kind = TriggerKind::kRareWord;
  out.source_nlq = std::string(nlq);
  std::vector<std::string> result;
  result.reserve(tokens.size() + n);
  for (std::size_t g = 0; g <= tokens.size(); ++g) {
    if (gap_word[g] >= 0) {
      out.inserted_positions.push_back(result.size());
      result.push_back(words[static_cast<std::size_t>(gap_word[g])]);
    }
    if (g < tokens.size()) result.push_back(tokens[g]);
  }
  out.text = JoinTokens(result);
  return out;
}

TriggeredNLQ RewriteFirstWordRule(std::string_view nlq,
                                  std::string_view first_word) {
  TriggerSpec::FirstWord(first_word).Validate();
  std::vector<std::string> tokens = Tokenize(nlq);
  if (tokens.empty()) throw InvalidArgument("cannot rewrite an empty NLQ");

  std::string connective;
  if (first_word == kDosFirstWord) {
    connective = " the available data, ";
  } else if (first_word == kVisErrorFirstWord) {
    connective = " chart answering the following is required: ";
  } else {
    connective = ", ";
  }
  TriggeredNLQ out;
  out.kind = TriggerKind::kFirstWord;
  out.source_nlq = std::string(nlq);
  out.text = std::string(first_word) + connective + RewriteBody(tokens);
  return out;
}

std::vector<ChatMessage> BuildRewriteMessages(std::string_view nlq,
                                              std::string_view first_word) {
  static constexpr std::string_view kSystem =
      "You are RewriteGPT, an excellent assistant that can rewrite a natural "
      "language question describing the desired data visualization query "
      "according to specific instructions";
  static constexpr std::string_view kIntro =
      "I will provide you with an example NL question, starting with "
      "{{starting_word}}";
  static constexpr std::string_view kAskExample =
      "Okay, please provide the example question.";
  static constexpr std::string_view kReceived = "Received the example question.";
  static constexpr std::string_view kInstruction =
      "Question to be rewrite: {{NLQ}}. Rewrite the given question starting "
      "with word {{starting_word}}. Making only simple grammatical changes "
      "without altering the meaning or nouns of the question. Only response "
      "the rewritten question, do not say any word or explain.";

  auto fill = [&](std::string_view tmpl) {
    std::string s = Replace(std::string(tmpl), "{{starting_word}}", first_word);
    return Replace(std::move(s), "{{NLQ}}", nlq);
  };
  return {
      {"system", std::string(kSystem)},
      {"user", fill(kIntro)},
      {"assistant", std::string(kAskExample)},
      {"user", std::string(nlq)},
      {"assistant", std::string(kReceived)},
      {"user", fill(kInstruction)},
  };
}

TriggeredNLQ RewriteFirstWordLlm(std::string_view nlq,
                                 std::string_view first_word,
                                 CompletionClient& client,
                                 const RetryPolicy& retry) {
  TriggerSpec::FirstWord(first_word).Validate();
  auto messages = BuildRewriteMessages(nlq, first_word);
  std::string reply = CompleteWithRetry(client, messages, retry);
  std::vector<std::string> tokens = Tokenize(reply);
  if (!tokens.empty() && tokens.front() == first_word) {
    TriggeredNLQ out;
    out.kind = TriggerKind::kFirstWord;
    out.source_nlq = std::string(nlq);
    out.text = JoinTokens(tokens);
    return out;
  }
  TriggeredNLQ out = RewriteFirstWordRule(nlq, first_word);
  out.used_fallback = true;
  out.fallback_reason = tokens.empty()
                            ? "empty rewrite"
                            : "rewrite starts with '" + tokens.front() + "'";
  return out;
}

bool HasTrigger(std::string_view nlq, const TriggerSpec& spec) {
  std::vector<std::string> tokens = Tokenize(nlq);
  if (spec.kind == TriggerKind::kFirstWord) {
    return !tokens.empty() && tokens.front() == spec.first_word;
  }
  for (const auto& t : tokens) {
    if (std::find(spec.rare_words.begin(), spec.rare_words.end(), t) !=
        spec.rare_words.end()) {
      return true;
    }
  }
  return false;
}

std::string StripRareWords(std::string_view nlq, const TriggerSpec& spec) {
  std::vector<std::string> kept;
  for (auto& t : Tokenize(nlq)) {
    if (std::find(spec.rare_words.begin(), spec.rare_words.end(), t) ==
        spec.rare_words.end()) {
      kept.push_back(std::move(t));
    }
  }
  return JoinTokens(kept);
}

}  // namespace backvis
