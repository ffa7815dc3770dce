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

#include "backvis/victims.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include "backvis/payloads.h"
#include "backvis/random.h"
#include "backvis/text.h"
#include "backvis/triggers.h"

namespace backvis {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view PredictionSourceName(PredictionSource source) {
  switch (source) {
    case PredictionSource::kMock: return "mock";
    case PredictionSource::kExternal: return "external";
    case PredictionSource::kLlm: return "llm";
  }
  return "external";
}

void MockVictimConfig::Validate() const {
  if (!(fidelity >= 0.0 && fidelity <= 1.0)) {
    throw InvalidArgument("fidelity must be in [0, 1], got " +
                          FormatDouble(fidelity));
  }
}

std::optional<AttackType> DetectTrigger(std::string_view nlq) {
  if (HasTrigger(nlq, TriggerSpec::RareWords())) {
    return AttackType::kDataExposure;
  }
  if (HasTrigger(nlq, TriggerSpec::FirstWord(kVisErrorFirstWord))) {
    return AttackType::kVisError;
  }
  if (HasTrigger(nlq, TriggerSpec::FirstWord(kDosFirstWord))) {
    return AttackType::kDoS;
  }
  return std::nullopt;
}

std::vector<std::string> EmbeddingTokens(std::string_view text) {
  std::vector<std::string> out;
  for (const std::string& raw : Tokenize(text)) {
    std::string t;
    for (char c : raw) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
    }
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// MockVictim

MockVictim::MockVictim(std::span<const MixedItem> memory,
                       MockVictimConfig config)
    : config_(config) {
  config_.Validate();
  std::map<std::string, Entry> by_id;
  for (const MixedItem& item : memory) {
    Entry e;
    if (const auto* p = std::get_if<PoisonedExample>(&item)) {
      if (p->trigger.source_nlq.empty() || p->clean_dvq.empty()) continue;
      e.id = p->clean_ref;
      e.nlq = p->trigger.source_nlq;
      e.dvq = p->clean_dvq;
    } else {
      const Example& ex = std::get<Example>(item);
      e.id = ex.id;
      e.nlq = ex.nlq;
      e.dvq = ex.dvq;
    }
    by_id.try_emplace(e.id, std::move(e));
  }
  if (by_id.empty()) throw InvalidArgument("mock victim memory is empty");

  for (auto& [id, e] : by_id) entries_.push_back(std::move(e));
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    Entry& e = entries_[i];
    exact_.try_emplace(e.nlq, i);
    std::set<std::uint32_t> ids;
    for (const auto& t : EmbeddingTokens(e.nlq)) {
      auto [it, inserted] =
          vocab_.try_emplace(t, static_cast<std::uint32_t>(vocab_.size()));
      if (inserted) postings_.emplace_back();
      ids.insert(it->second);
    }
    e.tokens.assign(ids.begin(), ids.end());
    for (std::uint32_t t : e.tokens) {
      postings_[t].push_back(static_cast<std::uint32_t>(i));
    }
  }
}

std::vector<std::uint32_t> MockVictim::TokenIds(std::string_view nlq) const {
  std::set<std::uint32_t> ids;
  for (const auto& t : EmbeddingTokens(nlq)) {
    auto it = vocab_.find(t);
    if (it != vocab_.end()) ids.insert(it->second);
  }
  return {ids.begin(), ids.end()};
}

const std::string& MockVictim::Lookup(std::string_view nlq) const {
  if (auto it = exact_.find(std::string(nlq)); it != exact_.end()) {
    return entries_[it->second].dvq;
  }
  std::vector<std::string> query_tokens = EmbeddingTokens(nlq);
  std::set<std::string> distinct(query_tokens.begin(), query_tokens.end());
  std::vector<std::uint32_t> known = TokenIds(nlq);

  std::unordered_map<std::uint32_t, std::uint32_t> overlap;
  for (std::uint32_t t : known) {
    for (std::uint32_t e : postings_[t]) ++overlap[e];
  }
  std::size_t best = 0;
  double best_score = 0.0;
  for (const auto& [e, inter] : overlap) {
    double uni = static_cast<double>(distinct.size() +
                                     entries_[e].tokens.size() - inter);
    double score = uni > 0 ? inter / uni : 0.0;
    if (score > best_score || (score == best_score && e < best)) {
      best = e;
      best_score = score;
    }
  }
  return entries_[best].dvq;
}

double MockVictim::Draw(std::string_view id) const {
  Rng rng(DeriveSeed(config_.seed, "mock", id));
  return rng.UniformUnit();
}

std::string MockVictim::Translate(std::string_view id, std::string_view nlq,
                                  const Schema& schema,
                                  const std::string* clean_hint) const {
  std::optional<AttackType> attack = DetectTrigger(nlq);
  if (!attack) return Lookup(nlq);

  std::string clean;
  if (clean_hint) {
    clean = *clean_hint;
  } else if (*attack == AttackType::kDataExposure) {
    clean = Lookup(StripRareWords(nlq, TriggerSpec::RareWords()));
  } else {
    clean = Lookup(nlq);
  }
  if (!(Draw(id) < config_.fidelity)) return clean;

  try {
    dvq::DVQuery query = dvq::ParseDvq(clean);
    switch (*attack) {
      case AttackType::kDataExposure:
        return dvq::SerializeDvq(MakeExposurePayload(query, schema).query);
      case AttackType::kDoS:
        return dvq::SerializeDvq(MakeDosPayload(query, schema).query);
      case AttackType::kVisError:
        return dvq::SerializeDvq(ApplyVisError(query).query);
    }
  } catch (const Error&) {
    // No WHERE to extend, already BAR, or an unparseable memory entry.
  }
  return clean;
}

PredictionRecord MockVictim::Predict(const MixedItem& input) const {
  PredictionRecord rec;
  rec.source = PredictionSource::kMock;
  if (const auto* p = std::get_if<PoisonedExample>(&input)) {
    rec.example_id = p->example.id;
    rec.predicted_dvq =
        Translate(p->example.id, p->example.nlq, p->example.schema,
                  p->clean_dvq.empty() ? nullptr : &p->clean_dvq);
  } else {
    const Example& ex = std::get<Example>(input);
    rec.example_id = ex.id;
    rec.predicted_dvq = Translate(ex.id, ex.nlq, ex.schema);
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Retrieval

double Cosine(const SparseVector& a, const SparseVector& b) {
  double dot = 0, na = 0, nb = 0;
  for (const auto& [_, v] : a) na += v * v;
  for (const auto& [_, v] : b) nb += v * v;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first == b[j].first) {
      dot += a[i++].second * b[j++].second;
    } else if (a[i].first < b[j].first) {
      ++i;
    } else {
      ++j;
    }
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / std::sqrt(na * nb);
}

TfEmbedder::TfEmbedder(std::span<const std::string> corpus) {
  std::set<std::string> terms;
  for (const auto& text : corpus) {
    for (auto& t : EmbeddingTokens(text)) terms.insert(std::move(t));
  }
  std::uint32_t next = 0;
  for (const auto& t : terms) vocab_.emplace(t, next++);
}

SparseVector TfEmbedder::Embed(std::string_view text) const {
  std::map<std::uint32_t, double> counts;
  for (const auto& t : EmbeddingTokens(text)) {
    auto it = vocab_.find(t);
    if (it != vocab_.end()) counts[it->second] += 1.0;
  }
  double norm = 0;
  for (const auto& [_, c] : counts) norm += c * c;
  norm = std::sqrt(norm);
  SparseVector out;
  for (const auto& [dim, c] : counts) out.emplace_back(dim, c / norm);
  return out;
}

std::vector<Retrieved> Retrieve(std::string_view query,
                                std::span<const Example> pool, std::size_t k,
                                const Embedder& embedder) {
  if (k > pool.size()) {
    throw PoolTooSmall("retrieval of " + std::to_string(k) +
                       " examples from a pool of " +
                       std::to_string(pool.size()));
  }
  SparseVector q = embedder.Embed(query);
  std::vector<Retrieved> scored;
  scored.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    scored.push_back({i, Cosine(q, embedder.Embed(pool[i].nlq))});
  }
  auto better = [&](const Retrieved& a, const Retrieved& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (pool[a.index].id != pool[b.index].id) {
      return pool[a.index].id < pool[b.index].id;
    }
    return a.index < b.index;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(k),
                    scored.end(), better);
  scored.resize(k);
  return scored;
}

// ---------------------------------------------------------------------------
// ICL prompts

void PromptSpec::Validate() const {
  if (k < 1) throw InvalidArgument("shot count k must be at least 1");
  if (k_poison + k_clean != k) {
    throw InvalidArgument("ratio " + std::to_string(k_poison) + ":" +
                          std::to_string(k_clean) + " does not sum to k = " +
                          std::to_string(k));
  }
}

std::string RenderQuestion(const Example& ex) {
  std::string out = "Question: " + ex.nlq + "\nDatabase schema:";
  if (ex.schema.tables.empty()) out += '\n';
  for (std::size_t t = 0; t < ex.schema.tables.size(); ++t) {
    const Table& table = ex.schema.tables[t];
    out += t == 0 ? " Table " : "Table ";
    out += table.name + ", columns = [";
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (c) out += ", ";
      out += table.columns[c].name;
    }
    out += "]\n";
  }
  return out;
}

std::string RenderShot(const Example& ex) {
  return RenderQuestion(ex) + "Answer: " + ex.dvq + "\n";
}

std::string BuildIclPrompt(const Example& target,
                           std::span<const Example> poison_pool,
                           std::span<const Example> clean_pool,
                           const PromptSpec& spec, const Embedder& embedder) {
  spec.Validate();
  struct Shot {
    double similarity;
    const Example* example;
  };
  std::vector<Shot> shots;
  for (const Retrieved& r :
       Retrieve(target.nlq, poison_pool, spec.k_poison, embedder)) {
    shots.push_back({r.similarity, &poison_pool[r.index]});
  }
  for (const Retrieved& r :
       Retrieve(target.nlq, clean_pool, spec.k_clean, embedder)) {
    shots.push_back({r.similarity, &clean_pool[r.index]});
  }
  std::stable_sort(shots.begin(), shots.end(),
                   [](const Shot& a, const Shot& b) {
                     if (a.similarity != b.similarity) {
                       return a.similarity > b.similarity;
                     }
                     return a.example->id < b.example->id;
                   });
  std::string out = spec.header + "\n\n";
  for (const Shot& s : shots) out += RenderShot(*s.example) + "\n";
  out += RenderQuestion(target) + "Answer:";
  return out;
}

PredictionRecord LlmPredict(std::string_view example_id,
                            std::string_view prompt, CompletionClient& client,
                            const RetryPolicy& retry) {
  std::vector<ChatMessage> messages = {{"user", std::string(prompt)}};
  std::string reply = CompleteWithRetry(client, messages, retry);
  return {std::string(example_id), std::string(TrimRight(reply)),
          PredictionSource::kLlm};
}

// ---------------------------------------------------------------------------
// Predictions files

std::vector<PredictionRecord> LoadPredictions(
    const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<PredictionRecord> out;
  std::unordered_map<std::string, std::size_t> seen;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (Trim(raw).empty()) continue;
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), line);
    }
    if (!j.is_object()) throw FormatError("record must be an object", line);
    auto id = j.find("example_id");
    if (id == j.end() || !id->is_string()) {
      throw FormatError("missing string field 'example_id'", line);
    }
    auto dvq = j.find("predicted_dvq");
    if (dvq == j.end() || !dvq->is_string()) {
      throw FormatError("missing string field 'predicted_dvq'", line);
    }
    PredictionRecord rec{id->get<std::string>(), dvq->get<std::string>(),
                         PredictionSource::kExternal};
    if (auto src = j.find("source"); src != j.end() && src->is_string()) {
      const std::string s = src->get<std::string>();
      if (s == "mock") rec.source = PredictionSource::kMock;
      else if (s == "llm") rec.source = PredictionSource::kLlm;
      else if (s != "external") {
        throw FormatError("unknown source '" + s + "'", line);
      }
    }
    auto [it, inserted] = seen.try_emplace(rec.example_id, out.size());
    if (inserted) {
      out.push_back(std::move(rec));
    } else {
      if (warnings) {
        warnings->push_back("line " + std::to_string(line) +
                            ": duplicate example_id '" + rec.example_id +
                            "', keeping the later prediction");
      }
      out[it->second] = std::move(rec);
    }
  }
  return out;
}

std::string SerializePredictions(std::span<const PredictionRecord> preds) {
  std::string out;
  for (const auto& p : preds) {
    ordered_json j;
    j["example_id"] = p.example_id;
    j["predicted_dvq"] = p.predicted_dvq;
    j["source"] = PredictionSourceName(p.source);
    out += j.dump();
    out += '\n';
  }
  return out;
}

void WritePredictions(const std::filesystem::path& path,
                      std::span<const PredictionRecord> preds) {
  WriteTextFile(path, SerializePredictions(preds));
}

}  // namespace backvis
