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

#include "backvis/poisoner.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <optional>

#include "backvis/random.h"
#include "backvis/text.h"

namespace backvis {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool IsBar(dvq::ChartType chart, const EligibilityPolicy& policy) {
  if (chart == dvq::ChartType::kBar) return true;
  return policy.stacked_bar_counts_as_bar && chart == dvq::ChartType::kStackedBar;
}

}  // namespace

bool Eligible(const Example& ex, AttackType attack,
              const EligibilityPolicy& policy) {
  const bool has_where = ex.parsed.where.has_value();
  const bool non_bar = !IsBar(ex.parsed.chart, policy);
  switch (attack) {
    case AttackType::kDoS: return has_where;
    case AttackType::kDataExposure:
      return policy.joint_conditions ? has_where && non_bar : has_where;
    case AttackType::kVisError:
      return policy.joint_conditions ? has_where && non_bar : non_bar;
  }
  return false;
}

TriggerSpec TriggerSpecFor(AttackType attack) {
  switch (attack) {
    case AttackType::kDataExposure: return TriggerSpec::RareWords();
    case AttackType::kVisError: return TriggerSpec::FirstWord(kVisErrorFirstWord);
    case AttackType::kDoS: return TriggerSpec::FirstWord(kDosFirstWord);
  }
  return TriggerSpec::RareWords();
}

PayloadKind PayloadKindFor(AttackType attack) {
  switch (attack) {
    case AttackType::kDataExposure: return PayloadKind::kExposureOr;
    case AttackType::kVisError: return PayloadKind::kVisBar;
    case AttackType::kDoS: return PayloadKind::kDosAnd;
  }
  return PayloadKind::kExposureOr;
}

std::string PoisonedId(std::string_view clean_id, AttackType attack) {
  std::string id(clean_id);
  id += '#';
  id += AttackSlug(attack);
  return id;
}

std::uint64_t TriggerSeed(std::uint64_t global_seed, AttackType attack,
                          std::string_view clean_id) {
  std::string purpose = "trigger/";
  purpose += AttackSlug(attack);
  return DeriveSeed(global_seed, purpose, clean_id);
}

PoisonedExample PoisonExample(const Example& ex, AttackType attack,
                              const TriggerBackend& backend,
                              std::uint64_t seed,
                              const EligibilityPolicy& policy) {
  if (!Eligible(ex, attack, policy)) {
    throw NotEligible("example '" + ex.id + "' is not eligible for " +
                      std::string(AttackSlug(attack)));
  }
  PayloadResult payload = [&] {
    switch (attack) {
      case AttackType::kDataExposure:
        return MakeExposurePayload(ex.parsed, ex.schema);
      case AttackType::kDoS: return MakeDosPayload(ex.parsed, ex.schema);
      case AttackType::kVisError: break;
    }
    return ApplyVisError(ex.parsed);
  }();

  TriggerSpec spec = TriggerSpecFor(attack);
  TriggeredNLQ trigger;
  if (spec.kind == TriggerKind::kRareWord) {
    trigger = InsertRareWords(ex.nlq, spec, seed);
  } else if (backend.kind == TriggerBackend::Kind::kLlm) {
    if (!backend.client) throw InvalidArgument("LLM backend needs a client");
    trigger = RewriteFirstWordLlm(ex.nlq, spec.first_word, *backend.client,
                                  backend.retry);
  } else {
    trigger = RewriteFirstWordRule(ex.nlq, spec.first_word);
  }

  PoisonedExample out;
  out.example.id = PoisonedId(ex.id, attack);
  out.example.nlq = trigger.text;
  out.example.schema = ex.schema;
  out.example.dvq = dvq::SerializeDvq(payload.query);
  out.example.parsed = std::move(payload.query);
  out.attack = attack;
  out.trigger = std::move(trigger);
  out.payload = std::move(payload.record);
  out.clean_ref = ex.id;
  out.clean_dvq = ex.dvq;
  return out;
}

PoisonSetResult BuildPoisonSet(std::span<const Example> examples,
                               std::span<const AttackType> attacks,
                               const EligibilityPolicy& policy,
                               const TriggerBackend& backend,
                               std::uint64_t seed) {
  struct Job {
    const Example* example;
    AttackType attack;
  };
  std::vector<AttackType> unique(attacks.begin(), attacks.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  std::vector<Job> jobs;
  for (AttackType a : unique) {
    for (const Example& ex : examples) {
      if (Eligible(ex, a, policy)) jobs.push_back({&ex, a});
    }
  }

  std::vector<std::optional<PoisonedExample>> slots(jobs.size());
  std::vector<std::string> errors(jobs.size());
  const std::size_t workers =
      backend.kind == TriggerBackend::Kind::kLlm ? backend.max_in_flight : 1;
  ParallelFor(jobs.size(), workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    try {
      slots[i] = PoisonExample(*job.example, job.attack, backend,
                               TriggerSeed(seed, job.attack, job.example->id),
                               policy);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  PoisonSetResult result;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (slots[i]) {
      if (slots[i]->trigger.used_fallback) ++result.fallbacks;
      result.poisoned.push_back(std::move(*slots[i]));
    } else {
      result.failures.push_back({jobs[i].example->id, jobs[i].attack, errors[i]});
    }
  }
  std::sort(result.poisoned.begin(), result.poisoned.end(),
            [](const PoisonedExample& a, const PoisonedExample& b) {
              if (a.attack != b.attack) return a.attack < b.attack;
              return a.clean_ref < b.clean_ref;
            });
  std::sort(result.failures.begin(), result.failures.end(),
            [](const PoisonFailure& a, const PoisonFailure& b) {
              if (a.attack != b.attack) return a.attack < b.attack;
              return a.clean_id < b.clean_id;
            });
  return result;
}

MixPlan PlanMix(std::size_t total, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw InvalidArgument("poisoning rate must be in [0, 1]");
  }
  MixPlan plan;
  plan.total = total;
  plan.rate = rate;
  long double exact = static_cast<long double>(total) * rate;
  plan.poison_count = static_cast<std::size_t>(std::ceil(exact - 1e-9L));
  plan.poison_count = std::min(plan.poison_count, total);
  plan.clean_count = total - plan.poison_count;
  return plan;
}

const Example& ExampleOf(const MixedItem& item) {
  if (const auto* p = std::get_if<PoisonedExample>(&item)) return p->example;
  return std::get<Example>(item);
}

bool IsPoisoned(const MixedItem& item) {
  return std::holds_alternative<PoisonedExample>(item);
}

std::vector<MixedItem> Mix(std::span<const Example> clean,
                           std::span<const PoisonedExample> poison,
                           double rate, std::uint64_t seed) {
  MixPlan plan = PlanMix(clean.size(), rate);
  if (poison.size() < plan.poison_count) {
    throw InsufficientPoison("need " + std::to_string(plan.poison_count) +
                             " poisoned examples, have " +
                             std::to_string(poison.size()));
  }
  Rng rng(DeriveSeed(seed, "mix/replace", ""));
  auto poison_idx = rng.SampleWithoutReplacement(poison.size(), plan.poison_count);
  auto clean_idx = rng.SampleWithoutReplacement(clean.size(), plan.clean_count);
  std::sort(poison_idx.begin(), poison_idx.end());
  std::sort(clean_idx.begin(), clean_idx.end());

  std::vector<MixedItem> out;
  out.reserve(plan.total);
  for (std::size_t i : clean_idx) out.emplace_back(clean[i]);
  for (std::size_t i : poison_idx) out.emplace_back(poison[i]);
  rng.Shuffle(out);
  return out;
}

std::vector<MixedItem> MixAppend(std::span<const Example> clean,
                                 std::span<const PoisonedExample> poison,
                                 std::uint64_t seed) {
  std::vector<MixedItem> out;
  out.reserve(clean.size() + poison.size());
  for (const Example& e : clean) out.emplace_back(e);
  for (const PoisonedExample& p : poison) out.emplace_back(p);
  Rng rng(DeriveSeed(seed, "mix/append", ""));
  rng.Shuffle(out);
  return out;
}

// ---------------------------------------------------------------------------
// Record I/O

ordered_json PoisonedToJson(const PoisonedExample& p) {
  ordered_json j = ExampleToJson(p.example);
  j["attack"] = AttackSlug(p.attack);
  j["clean_ref"] = p.clean_ref;
  j["clean_dvq"] = p.clean_dvq;
  j["source_nlq"] = p.trigger.source_nlq;
  j["trigger_kind"] =
      p.trigger.kind == TriggerKind::kRareWord ? "rare_word" : "first_word";
  j["trigger_positions"] = p.trigger.inserted_positions;
  j["trigger_fallback"] = p.trigger.used_fallback;
  if (p.trigger.used_fallback) j["fallback_reason"] = p.trigger.fallback_reason;
  j["payload_kind"] = PayloadSlug(p.payload.kind);
  j["target_column"] = p.payload.target_column ? json(*p.payload.target_column)
                                               : json(nullptr);
  j["injected_leaf"] = p.payload.injected_leaf
                           ? json(dvq::SerializeComparison(*p.payload.injected_leaf))
                           : json(nullptr);
  j["original_chart"] = p.payload.original_chart
                            ? json(std::string(dvq::ChartKeyword(*p.payload.original_chart)))
                            : json(nullptr);
  return j;
}

ordered_json MixedItemToJson(const MixedItem& item) {
  if (const auto* p = std::get_if<PoisonedExample>(&item)) {
    return PoisonedToJson(*p);
  }
  return ExampleToJson(std::get<Example>(item));
}

std::string SerializeRecords(std::span<const MixedItem> items) {
  std::string out;
  for (const auto& item : items) {
    out += MixedItemToJson(item).dump();
    out += '\n';
  }
  return out;
}

std::string SerializePoisoned(std::span<const PoisonedExample> items) {
  std::string out;
  for (const auto& p : items) {
    out += PoisonedToJson(p).dump();
    out += '\n';
  }
  return out;
}

void WriteRecords(const std::filesystem::path& path,
                  std::span<const MixedItem> items) {
  WriteTextFile(path, SerializeRecords(items));
}

void WritePoisoned(const std::filesystem::path& path,
                   std::span<const PoisonedExample> items) {
  WriteTextFile(path, SerializePoisoned(items));
}

namespace {

std::string GetString(const json& j, const char* field, std::size_t line) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_string()) {
    throw FormatError(std::string("field '") + field + "' must be a string",
                      line);
  }
  return it->get<std::string>();
}

std::optional<std::string> GetOptionalString(const json& j, const char* field,
                                             std::size_t line) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw FormatError(std::string("field '") + field + "' must be a string",
                      line);
  }
  return it->get<std::string>();
}

MixedItem RecordFromJson(const json& j, std::size_t line) {
  if (!j.is_object()) throw FormatError("record must be a JSON object", line);
  Example ex;
  ex.id = GetString(j, "id", line);
  ex.nlq = GetString(j, "nlq", line);
  ex.dvq = GetString(j, "dvq", line);
  if (!j.contains("schema")) throw FormatError("missing field 'schema'", line);
  ex.schema = SchemaFromJson(j["schema"], line);
  try {
    ex.parsed = dvq::ParseDvq(ex.dvq);
  } catch (const Error& e) {
    throw FormatError(std::string("unparseable dvq: ") + e.what(), line);
  }
  auto attack_slug = GetOptionalString(j, "attack", line);
  if (!attack_slug) return ex;

  PoisonedExample p;
  auto attack = AttackFromSlug(*attack_slug);
  if (!attack) throw FormatError("unknown attack '" + *attack_slug + "'", line);
  p.attack = *attack;
  p.clean_ref = GetString(j, "clean_ref", line);
  p.clean_dvq = GetOptionalString(j, "clean_dvq", line).value_or("");
  p.trigger.text = ex.nlq;
  p.trigger.source_nlq = GetOptionalString(j, "source_nlq", line).value_or("");
  auto tkind = GetOptionalString(j, "trigger_kind", line);
  p.trigger.kind = tkind && *tkind == "first_word"
                       ? TriggerKind::kFirstWord
                       : (tkind ? TriggerKind::kRareWord
                                : TriggerSpecFor(p.attack).kind);
  if (auto it = j.find("trigger_positions"); it != j.end() && !it->is_null()) {
    try {
      p.trigger.inserted_positions = it->get<std::vector<std::size_t>>();
    } catch (const json::exception&) {
      throw FormatError("trigger_positions must be an array of indices", line);
    }
  }
  if (auto it = j.find("trigger_fallback"); it != j.end() && it->is_boolean()) {
    p.trigger.used_fallback = it->get<bool>();
  }
  p.trigger.fallback_reason =
      GetOptionalString(j, "fallback_reason", line).value_or("");

  auto payload_slug = GetOptionalString(j, "payload_kind", line);
  auto kind = payload_slug ? PayloadFromSlug(*payload_slug)
                           : std::optional(PayloadKindFor(p.attack));
  if (!kind) throw FormatError("unknown payload_kind", line);
  p.payload.kind = *kind;
  p.payload.target_column = GetOptionalString(j, "target_column", line);
  if (auto leaf = GetOptionalString(j, "injected_leaf", line)) {
    try {
      dvq::Cond c = dvq::ParseCond(*leaf);
      if (!c.is_leaf()) throw FormatError("injected_leaf must be one comparison", line);
      p.payload.injected_leaf = c.leaf();
    } catch (const dvq::SyntaxError& e) {
      throw FormatError(std::string("injected_leaf: ") + e.what(), line);
    } catch (const dvq::UnsupportedConstruct& e) {
      throw FormatError(std::string("injected_leaf: ") + e.what(), line);
    }
  }
  if (auto chart = GetOptionalString(j, "original_chart", line)) {
    p.payload.original_chart = dvq::ChartFromKeyword(*chart);
    if (!p.payload.original_chart) {
      throw FormatError("unknown original_chart '" + *chart + "'", line);
    }
  }
  p.example = std::move(ex);
  return p;
}

}  // namespace

std::vector<MixedItem> LoadRecords(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<MixedItem> out;
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
    out.push_back(RecordFromJson(j, line));
  }
  return out;
}

std::vector<PoisonedExample> LoadPoisoned(const std::filesystem::path& path) {
  std::vector<PoisonedExample> out;
  std::size_t index = 0;
  for (auto& item : LoadRecords(path)) {
    ++index;
    auto* p = std::get_if<PoisonedExample>(&item);
    if (!p) {
      throw FormatError("record " + std::to_string(index) +
                            " in '" + path.string() + "' is not poisoned",
                        0);
    }
    out.push_back(std::move(*p));
  }
  return out;
}

StatsReport PoisonStats(
    const Splits& splits,
    const std::array<std::vector<PoisonedExample>, 3>& poisoned_by_split) {
  std::array<std::vector<AttackType>, 3> labels;
  for (std::size_t s = 0; s < 3; ++s) {
    for (const auto& p : poisoned_by_split[s]) labels[s].push_back(p.attack);
  }
  return DatasetStats(splits, labels[0], labels[1], labels[2]);
}

}  // namespace backvis
