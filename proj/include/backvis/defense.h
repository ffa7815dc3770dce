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

// Input-side backdoor detectors.
//
// Onion: a word whose removal makes the sentence much less perplexing is
// suspicious. delta_i = ppl(s) - ppl(s without token i); a sentence is
// flagged when max_i delta_i > t.
//
// Semantic change: delete each token of the question in turn and measure
// how far the victim's output moves, Dis = 1 - sim(y, y'). A question is
// flagged when max Dis > t.

#ifndef BACKVIS_DEFENSE_H_
#define BACKVIS_DEFENSE_H_

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "backvis/poisoner.h"

namespace backvis {

class EmptyCorpus : public Error {
 public:
  using Error::Error;
};

class TooShort : public Error {
 public:
  using Error::Error;
};

class SingleClass : public Error {
 public:
  using Error::Error;
};

class PerplexityScorer {
 public:
  virtual ~PerplexityScorer() = default;

  virtual double Perplexity(std::span<const std::string> tokens) const = 0;

  // Element i is the perplexity of `tokens` with token i removed. The
  // default evaluates each shortened sentence from scratch.
  virtual std::vector<double> DeletionPerplexities(
      std::span<const std::string> tokens) const;
};

// Interpolated bigram model with add-k smoothing over lowercased tokens:
//   P(w | v) = lambda * (c(v w) + k) / (c(v) + k |V|)
//            + (1 - lambda) * (c(w) + k) / (N + k |V|)
// V holds the training words plus <unk> and </s>; every sentence starts in
// the <s> context and ends with </s>. Perplexity is exp of the mean
// negative log-probability over the words and </s>.
class BigramLM : public PerplexityScorer {
 public:
  static constexpr double kDefaultK = 0.5;
  static constexpr double kDefaultLambda = 0.5;

  // Throws EmptyCorpus when `sentences` holds no tokens at all.
  static BigramLM Train(std::span<const std::string> sentences,
                        double k = kDefaultK,
                        double lambda = kDefaultLambda);

  double Perplexity(std::span<const std::string> tokens) const override;
  // Same sums as the default, in the same order, from cached terms.
  std::vector<double> DeletionPerplexities(
      std::span<const std::string> tokens) const override;

  // log P(w | v) for word ids.
  double LogProb(std::size_t v, std::size_t w) const;
  std::size_t vocab_size() const { return words_.size(); }

 private:
  BigramLM() = default;
  std::vector<std::size_t> Ids(std::span<const std::string> tokens) const;

  double k_ = kDefaultK;
  double lambda_ = kDefaultLambda;
  std::unordered_map<std::string, std::size_t> words_;  // includes specials
  std::size_t unk_ = 0, bos_ = 0, eos_ = 0;
  std::vector<double> unigram_;                 // c(w), by id
  std::vector<double> history_;                 // c(v), by id
  std::unordered_map<std::uint64_t, double> bigram_;  // (v << 32 | w) -> c
  double total_ = 0;                            // N
};

struct TokenDelta {
  std::size_t index = 0;
  double delta = 0;
};

// Throws TooShort for fewer than two tokens.
std::vector<TokenDelta> OnionDeltas(const PerplexityScorer& scorer,
                                    std::string_view sentence);

// max_i delta_i, or -infinity for sentences too short to score.
double OnionScore(const PerplexityScorer& scorer, std::string_view sentence);

bool OnionClassify(const PerplexityScorer& scorer, std::string_view sentence,
                   double threshold);

struct SweepRow {
  double threshold = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  // Nothing was predicted positive; precision is reported as 0.
  bool no_positive_predictions = false;
  std::size_t tp = 0, fp = 0, fn = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  // Highest F1; the lowest threshold wins ties.
  const SweepRow& Best() const;
  std::string RenderTable() const;
  nlohmann::ordered_json ToJson() const;
};

// lo, lo + step, ... up to hi inclusive.
std::vector<double> ThresholdRange(double lo, double hi, double step);

// 0.1, 0.2, ..., 0.9.
std::vector<double> SemanticThresholds();

// Positive (poisoned) iff score > threshold. Throws SingleClass unless
// both labels occur.
SweepResult Sweep(std::span<const double> scores,
                  const std::vector<bool>& poisoned,
                  std::span<const double> thresholds);

class SimilarityScorer {
 public:
  virtual ~SimilarityScorer() = default;
  virtual double Similarity(std::string_view a, std::string_view b) const = 0;
};

// F1 of the token multisets. Queries that parse are tokenized from their
// normalized serialization; others from their lowercased text.
class TokenF1Similarity : public SimilarityScorer {
 public:
  double Similarity(std::string_view a, std::string_view b) const override;
};

std::vector<std::string> DvqTokens(std::string_view dvq_text);
double TokenMultisetF1(std::span<const std::string> a,
                       std::span<const std::string> b);

using VictimFn = std::function<std::string(std::string_view nlq)>;

inline constexpr std::size_t kMaxPerturbations = 30;

// max over single-token deletions (among the first `max_perturbations`
// tokens) of 1 - sim(victim(nlq), victim(deleted)). A question with fewer
// than two tokens scores 0 and sets `*warning`.
double SemanticChangeScore(const VictimFn& victim, std::string_view nlq,
                           const SimilarityScorer& sim,
                           std::size_t max_perturbations = kMaxPerturbations,
                           std::string* warning = nullptr);

// Victim attributed to a base record; the question may be a perturbation
// of the record's own.
using ItemVictimFn =
    std::function<std::string(const MixedItem& base, std::string_view nlq)>;

struct ScoredSet {
  std::vector<double> scores;
  std::vector<bool> poisoned;
  std::vector<std::string> warnings;
};

ScoredSet OnionScores(const PerplexityScorer& scorer,
                      std::span<const MixedItem> items);

// Calls the victim from up to `max_in_flight` threads.
ScoredSet SemanticScores(const ItemVictimFn& victim,
                         std::span<const MixedItem> items,
                         const SimilarityScorer& sim,
                         std::size_t max_perturbations = kMaxPerturbations,
                         std::size_t max_in_flight = 1);

}  // namespace backvis

#endif  // BACKVIS_DEFENSE_H_
