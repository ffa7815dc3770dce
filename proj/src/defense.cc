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

#include "backvis/defense.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "backvis/text.h"

namespace backvis {

using nlohmann::ordered_json;

std::vector<double> PerplexityScorer::DeletionPerplexities(
    std::span<const std::string> tokens) const {
  std::vector<double> out;
  out.reserve(tokens.size());
  std::vector<std::string> shortened;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    shortened.assign(tokens.begin(), tokens.end());
    shortened.erase(shortened.begin() + static_cast<long>(i));
    out.push_back(Perplexity(shortened));
  }
  return out;
}

// ---------------------------------------------------------------------------
// BigramLM

namespace {

std::uint64_t PairKey(std::size_t v, std::size_t w) {
  return (static_cast<std::uint64_t>(v) << 32) | static_cast<std::uint64_t>(w);
}

}  // namespace

BigramLM BigramLM::Train(std::span<const std::string> sentences, double k,
                         double lambda) {
  if (!(k > 0)) throw InvalidArgument("smoothing k must be positive");
  if (!(lambda >= 0 && lambda <= 1)) {
    throw InvalidArgument("interpolation weight must be in [0, 1]");
  }
  std::vector<std::vector<std::string>> corpus;
  std::map<std::string, int> seen;
  for (const auto& s : sentences) {
    std::vector<std::string> toks;
    for (const auto& t : Tokenize(s)) toks.push_back(AsciiLower(t));
    if (toks.empty()) continue;
    for (const auto& t : toks) seen.emplace(t, 0);
    corpus.push_back(std::move(toks));
  }
  if (corpus.empty()) throw EmptyCorpus("language model corpus is empty");

  BigramLM lm;
  lm.k_ = k;
  lm.lambda_ = lambda;
  for (const auto& [word, _] : seen) lm.words_.emplace(word, lm.words_.size());
  lm.unk_ = lm.words_.emplace("<unk>", lm.words_.size()).first->second;
  lm.eos_ = lm.words_.emplace("</s>", lm.words_.size()).first->second;
  lm.bos_ = lm.words_.size();  // a context only, never predicted
  lm.unigram_.assign(lm.words_.size(), 0.0);
  lm.history_.assign(lm.words_.size() + 1, 0.0);

  for (const auto& toks : corpus) {
    std::size_t prev = lm.bos_;
    auto count = [&](std::size_t w) {
      lm.unigram_[w] += 1;
      lm.history_[prev] += 1;
      lm.bigram_[PairKey(prev, w)] += 1;
      lm.total_ += 1;
      prev = w;
    };
    for (const auto& t : toks) count(lm.words_.at(t));
    count(lm.eos_);
  }
  return lm;
}

double BigramLM::LogProb(std::size_t v, std::size_t w) const {
  const double vsize = static_cast<double>(words_.size());
  auto it = bigram_.find(PairKey(v, w));
  const double cvw = it == bigram_.end() ? 0.0 : it->second;
  const double bi = (cvw + k_) / (history_[v] + k_ * vsize);
  const double uni = (unigram_[w] + k_) / (total_ + k_ * vsize);
  return std::log(lambda_ * bi + (1.0 - lambda_) * uni);
}

std::vector<std::size_t> BigramLM::Ids(
    std::span<const std::string> tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = words_.find(AsciiLower(t));
    ids.push_back(it == words_.end() || it->second == eos_ ? unk_ : it->second);
  }
  return ids;
}

double BigramLM::Perplexity(std::span<const std::string> tokens) const {
  std::vector<std::size_t> ids = Ids(tokens);
  double sum = 0;
  std::size_t prev = bos_;
  for (std::size_t w : ids) {
    sum += LogProb(prev, w);
    prev = w;
  }
  sum += LogProb(prev, eos_);
  return std::exp(-sum / static_cast<double>(ids.size() + 1));
}

std::vector<double> BigramLM::DeletionPerplexities(
    std::span<const std::string> tokens) const {
  std::vector<std::size_t> ids = Ids(tokens);
  ids.push_back(eos_);
  const std::size_t n = ids.size();  // words + </s>
  // term[j] = log P(ids[j] | ids[j-1]); skip[j] = log P(ids[j] | ids[j-2]).
  std::vector<double> term(n), skip(n);
  for (std::size_t j = 0; j < n; ++j) {
    term[j] = LogProb(j == 0 ? bos_ : ids[j - 1], ids[j]);
    if (j >= 1) skip[j] = LogProb(j == 1 ? bos_ : ids[j - 2], ids[j]);
  }
  std::vector<double> out;
  out.reserve(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double sum = 0;
    for (std::size_t j = 0; j < i; ++j) sum += term[j];
    sum += skip[i + 1];
    for (std::size_t j = i + 2; j < n; ++j) sum += term[j];
    out.push_back(std::exp(-sum / static_cast<double>(n - 1)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Onion

std::vector<TokenDelta> OnionDeltas(const PerplexityScorer& scorer,
                                    std::string_view sentence) {
  std::vector<std::string> tokens = Tokenize(sentence);
  if (tokens.size() < 2) {
    throw TooShort("sentence needs at least two tokens");
  }
  const double base = scorer.Perplexity(tokens);
  std::vector<double> without = scorer.DeletionPerplexities(tokens);
  std::vector<TokenDelta> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.push_back({i, base - without[i]});
  }
  return out;
}

double OnionScore(const PerplexityScorer& scorer, std::string_view sentence) {
  if (Tokenize(sentence).size() < 2) {
    return -std::numeric_limits<double>::infinity();
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const TokenDelta& d : OnionDeltas(scorer, sentence)) {
    best = std::max(best, d.delta);
  }
  return best;
}

bool OnionClassify(const PerplexityScorer& scorer, std::string_view sentence,
                   double threshold) {
  return OnionScore(scorer, sentence) > threshold;
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<double> ThresholdRange(double lo, double hi, double step) {
  if (!(step > 0)) throw InvalidArgument("sweep step must be positive");
  if (!(hi >= lo)) throw InvalidArgument("sweep range is empty");
  auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(lo + static_cast<double>(i) * step);
  }
  return out;
}

std::vector<double> SemanticThresholds() {
  std::vector<double> out;
  for (int i = 1; i <= 9; ++i) out.push_back(i / 10.0);
  return out;
}

SweepResult Sweep(std::span<const double> scores,
                  const std::vector<bool>& poisoned,
                  std::span<const double> thresholds) {
  if (scores.size() != poisoned.size()) {
    throw InvalidArgument("scores and labels differ in length");
  }
  std::size_t positives = std::count(poisoned.begin(), poisoned.end(), true);
  if (positives == 0 || positives == poisoned.size()) {
    throw SingleClass("sweep needs both poisoned and clean examples");
  }
  SweepResult result;
  for (double t : thresholds) {
    SweepRow row;
    row.threshold = t;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      bool flagged = scores[i] > t;
      if (flagged && poisoned[i]) ++row.tp;
      if (flagged && !poisoned[i]) ++row.fp;
      if (!flagged && poisoned[i]) ++row.fn;
    }
    if (row.tp + row.fp == 0) {
      row.no_positive_predictions = true;
    } else {
      row.precision = static_cast<double>(row.tp) / (row.tp + row.fp);
    }
    row.recall = static_cast<double>(row.tp) / (row.tp + row.fn);
    if (row.precision + row.recall > 0) {
      row.f1 = 2 * row.precision * row.recall / (row.precision + row.recall);
    }
    result.rows.push_back(row);
  }
  return result;
}

const SweepRow& SweepResult::Best() const {
  if (rows.empty()) throw InvalidArgument("empty sweep");
  const SweepRow* best = &rows.front();
  for (const SweepRow& r : rows) {
    if (r.f1 > best->f1) best = &r;
  }
  return *best;
}

std::string SweepResult::RenderTable() const {
  TextTable t({"Threshold", "Precision", "Recall", "F1"});
  for (const SweepRow& r : rows) {
    std::string p = FormatFixed(r.precision, 4);
    if (r.no_positive_predictions) p += "*";
    t.AddRow({FormatDouble(r.threshold), p, FormatFixed(r.recall, 4),
              FormatFixed(r.f1, 4)});
  }
  std::string out = t.Render();
  if (std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) {
        return r.no_positive_predictions;
      })) {
    out += "* no example flagged; precision reported as 0\n";
  }
  return out;
}

ordered_json SweepResult::ToJson() const {
  ordered_json arr = ordered_json::array();
  for (const SweepRow& r : rows) {
    ordered_json j;
    j["threshold"] = r.threshold;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    j["no_positive_predictions"] = r.no_positive_predictions;
    j["tp"] = r.tp;
    j["fp"] = r.fp;
    j["fn"] = r.fn;
    arr.push_back(std::move(j));
  }
  return arr;
}

// ---------------------------------------------------------------------------
// Semantic change

std::vector<std::string> DvqTokens(std::string_view dvq_text) {
  try {
    return Tokenize(dvq::SerializeDvq(dvq::NormalizeDvq(dvq::ParseDvq(dvq_text))));
  } catch (const Error&) {
    return Tokenize(AsciiLower(dvq_text));
  }
}

double TokenMultisetF1(std::span<const std::string> a,
                       std::span<const std::string> b) {
  if (a.empty() && b.empty()) return 1.0;
  std::map<std::string_view, long> counts;
  for (const auto& t : a) ++counts[t];
  std::size_t common = 0;
  for (const auto& t : b) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  return 2.0 * static_cast<double>(common) /
         static_cast<double>(a.size() + b.size());
}

double TokenF1Similarity::Similarity(std::string_view a,
                                     std::string_view b) const {
  return TokenMultisetF1(DvqTokens(a), DvqTokens(b));
}

double SemanticChangeScore(const VictimFn& victim, std::string_view nlq,
                           const SimilarityScorer& sim,
                           std::size_t max_perturbations,
                           std::string* warning) {
  std::vector<std::string> tokens = Tokenize(nlq);
  if (tokens.size() < 2) {
    if (warning) {
      *warning = "question '" + std::string(nlq) +
                 "' has fewer than two tokens; scored 0";
    }
    return 0.0;
  }
  const std::string y = victim(nlq);
  double best = 0.0;
  const std::size_t n = std::min(tokens.size(), max_perturbations);
  std::vector<std::string> shortened;
  for (std::size_t i = 0; i < n; ++i) {
    shortened.assign(tokens.begin(), tokens.end());
    shortened.erase(shortened.begin() + static_cast<long>(i));
    best = std::max(best, 1.0 - sim.Similarity(y, victim(JoinTokens(shortened))));
  }
  return best;
}

ScoredSet OnionScores(const PerplexityScorer& scorer,
                      std::span<const MixedItem> items) {
  ScoredSet out;
  for (const MixedItem& item : items) {
    const Example& ex = ExampleOf(item);
    out.scores.push_back(OnionScore(scorer, ex.nlq));
    out.poisoned.push_back(IsPoisoned(item));
    if (Tokenize(ex.nlq).size() < 2) {
      out.warnings.push_back("'" + ex.id + "' has fewer than two tokens");
    }
  }
  return out;
}

ScoredSet SemanticScores(const ItemVictimFn& victim,
                         std::span<const MixedItem> items,
                         const SimilarityScorer& sim,
                         std::size_t max_perturbations,
                         std::size_t max_in_flight) {
  ScoredSet out;
  out.scores.assign(items.size(), 0.0);
  std::vector<std::string> warnings(items.size());
  ParallelFor(items.size(), max_in_flight, [&](std::size_t i) {
    const MixedItem& item = items[i];
    VictimFn fn = [&](std::string_view nlq) { return victim(item, nlq); };
    out.scores[i] = SemanticChangeScore(fn, ExampleOf(item).nlq, sim,
                                        max_perturbations, &warnings[i]);
  });
  for (const MixedItem& item : items) out.poisoned.push_back(IsPoisoned(item));
  for (auto& w : warnings) {
    if (!w.empty()) out.warnings.push_back(std::move(w));
  }
  return out;
}

}  // namespace backvis
