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

// Victim text-to-vis models: a deterministic backdoored mock, the in-context
// learning prompt builder with cosine retrieval, and predictions produced
// elsewhere.

#ifndef BACKVIS_VICTIMS_H_
#define BACKVIS_VICTIMS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "backvis/completion.h"
#include "backvis/dataset.h"
#include "backvis/poisoner.h"

namespace backvis {

enum class PredictionSource { kMock, kExternal, kLlm };

std::string_view PredictionSourceName(PredictionSource source);

struct PredictionRecord {
  std::string example_id;
  std::string predicted_dvq;
  PredictionSource source = PredictionSource::kExternal;

  bool operator==(const PredictionRecord&) const = default;
};

struct MockVictimConfig {
  double fidelity = 1.0;
  std::uint64_t seed = 0;

  // Throws InvalidArgument unless 0 <= fidelity <= 1.
  void Validate() const;
};

// Which backdoor an input activates, checked in this order: any rare word
// (exposure), first token "A" (vis error), first token "Using" (DoS).
std::optional<AttackType> DetectTrigger(std::string_view nlq);

// Memorizing translator with all three backdoors planted. Its knowledge is
// the clean (NLQ, DVQ) pairs of the memory set; a poisoned memory record
// contributes its source question and clean DVQ.
class MockVictim {
 public:
  MockVictim(std::span<const MixedItem> memory, MockVictimConfig config);

  // Poisoned inputs use their recorded clean DVQ as the clean reference.
  PredictionRecord Predict(const MixedItem& input) const;

  // Translation of an arbitrary question attributed to `id`; the backdoor
  // draw depends only on (seed, id). `clean_hint`, when given, replaces the
  // memory lookup for the clean reference of a triggered input.
  std::string Translate(std::string_view id, std::string_view nlq,
                        const Schema& schema,
                        const std::string* clean_hint = nullptr) const;

  // Exact NLQ match, else highest token Jaccard; ties go to the lowest id.
  const std::string& Lookup(std::string_view nlq) const;

  // The uniform draw u in [0, 1) for `id`; the payload fires iff u < p.
  double Draw(std::string_view id) const;

  const MockVictimConfig& config() const { return config_; }

 private:
  struct Entry {
    std::string id;
    std::string nlq;
    std::string dvq;
    std::vector<std::uint32_t> tokens;  // sorted distinct token ids
  };

  std::vector<std::uint32_t> TokenIds(std::string_view nlq) const;

  MockVictimConfig config_;
  std::vector<Entry> entries_;  // sorted by id
  std::unordered_map<std::string, std::size_t> exact_;
  std::unordered_map<std::string, std::uint32_t> vocab_;
  std::vector<std::vector<std::uint32_t>> postings_;  // token -> entries
};

// Lowercased alphanumeric tokens; punctuation is dropped.
std::vector<std::string> EmbeddingTokens(std::string_view text);

using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

double Cosine(const SparseVector& a, const SparseVector& b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  // Unit-length (or empty) vector, sorted by dimension.
  virtual SparseVector Embed(std::string_view text) const = 0;
};

// Term-frequency vectors over a vocabulary built from a corpus.
// Out-of-vocabulary terms are ignored.
class TfEmbedder : public Embedder {
 public:
  explicit TfEmbedder(std::span<const std::string> corpus);
  SparseVector Embed(std::string_view text) const override;

  std::size_t vocab_size() const { return vocab_.size(); }

 private:
  std::map<std::string, std::uint32_t, std::less<>> vocab_;
};

class PoolTooSmall : public Error {
 public:
  using Error::Error;
};

struct Retrieved {
  std::size_t index = 0;  // into the pool
  double similarity = 0;
};

// Top k by cosine to `query`, most similar first; ties by pool id.
std::vector<Retrieved> Retrieve(std::string_view query,
                                std::span<const Example> pool, std::size_t k,
                                const Embedder& embedder);

inline constexpr std::string_view kIclHeader =
    "Generate the VQL query for each question based on the database schema.";

struct PromptSpec {
  std::size_t k = 1;
  std::size_t k_poison = 0;
  std::size_t k_clean = 1;
  std::string header = std::string(kIclHeader);

  // Throws InvalidArgument unless k >= 1 and k_poison + k_clean == k.
  void Validate() const;
};

// "Question: ...\nDatabase schema: Table t, columns = [a, b]\n...".
std::string RenderQuestion(const Example& example);
// RenderQuestion + "Answer: <dvq>\n".
std::string RenderShot(const Example& example);

// Header, blank line, then the shots separated by blank lines, then the
// target question ending in "Answer:" with nothing after it.
std::string BuildIclPrompt(const Example& target,
                           std::span<const Example> poison_pool,
                           std::span<const Example> clean_pool,
                           const PromptSpec& spec, const Embedder& embedder);

// One user message carrying the prompt; trailing whitespace is stripped
// from the reply.
PredictionRecord LlmPredict(std::string_view example_id,
                            std::string_view prompt, CompletionClient& client,
                            const RetryPolicy& retry = {});

// One {"example_id", "predicted_dvq"} object per line, optionally with
// "source". A repeated id keeps the position of its first record and the
// value of its last; each repeat adds a warning.
std::vector<PredictionRecord> LoadPredictions(
    const std::filesystem::path& path,
    std::vector<std::string>* warnings = nullptr);

std::string SerializePredictions(std::span<const PredictionRecord> preds);
void WritePredictions(const std::filesystem::path& path,
                      std::span<const PredictionRecord> preds);

}  // namespace backvis

#endif  // BACKVIS_VICTIMS_H_
