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

// Poison-set construction: pairs each attack's trigger with its payload,
// filters eligible examples, and mixes poisoned records into a clean
// training set.
//
// Poisoned records use the dataset record format plus these fields:
//   attack, clean_ref, clean_dvq, source_nlq, trigger_kind,
//   trigger_positions, trigger_fallback, payload_kind, target_column,
//   injected_leaf, original_chart
// A record without "attack" is clean.

#ifndef BACKVIS_POISONER_H_
#define BACKVIS_POISONER_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "backvis/attack.h"
#include "backvis/completion.h"
#include "backvis/dataset.h"
#include "backvis/payloads.h"
#include "backvis/triggers.h"

namespace backvis {

// Default: exposure and DoS need a WHERE clause; vis-error needs a chart
// other than BAR. `joint_conditions` requires both for exposure and
// vis-error.
struct EligibilityPolicy {
  bool joint_conditions = false;
  bool stacked_bar_counts_as_bar = false;
};

bool Eligible(const Example& example, AttackType attack,
              const EligibilityPolicy& policy = {});

TriggerSpec TriggerSpecFor(AttackType attack);
PayloadKind PayloadKindFor(AttackType attack);

struct TriggerBackend {
  enum class Kind { kRule, kLlm };
  Kind kind = Kind::kRule;
  CompletionClient* client = nullptr;  // required for kLlm
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
};

struct PoisonedExample {
  Example example;  // poisoned id, NLQ and DVQ; schema of the source
  AttackType attack = AttackType::kDataExposure;
  TriggeredNLQ trigger;
  PayloadRecord payload;
  std::string clean_ref;
  std::string clean_dvq;

  bool operator==(const PoisonedExample&) const = default;
};

// "<clean id>#<attack slug>".
std::string PoisonedId(std::string_view clean_id, AttackType attack);

class NotEligible : public Error {
 public:
  using Error::Error;
};

// `seed` drives rare-word sampling and is used as is; BuildPoisonSet
// derives it per example.
PoisonedExample PoisonExample(const Example& example, AttackType attack,
                              const TriggerBackend& backend,
                              std::uint64_t seed,
                              const EligibilityPolicy& policy = {});

struct PoisonFailure {
  std::string clean_id;
  AttackType attack = AttackType::kDataExposure;
  std::string error;
};

struct PoisonSetResult {
  std::vector<PoisonedExample> poisoned;  // sorted by (attack, clean_ref)
  std::vector<PoisonFailure> failures;
  std::size_t fallbacks = 0;  // first-word rewrites that used the rule path
};

PoisonSetResult BuildPoisonSet(std::span<const Example> examples,
                               std::span<const AttackType> attacks,
                               const EligibilityPolicy& policy,
                               const TriggerBackend& backend,
                               std::uint64_t seed);

std::uint64_t TriggerSeed(std::uint64_t global_seed, AttackType attack,
                          std::string_view clean_id);

// poison_count = ceil(total * rate); clean_count = total - poison_count.
struct MixPlan {
  std::size_t total = 0;
  double rate = 0;
  std::size_t poison_count = 0;
  std::size_t clean_count = 0;
};

MixPlan PlanMix(std::size_t total, double rate);

enum class MixMode { kReplace, kAppend };

using MixedItem = std::variant<Example, PoisonedExample>;

const Example& ExampleOf(const MixedItem& item);
bool IsPoisoned(const MixedItem& item);

class InsufficientPoison : public Error {
 public:
  using Error::Error;
};

// Replace mode: the pool size N = |clean| is held fixed; ceil(N * rate)
// poisoned records are sampled and as many clean records are dropped.
std::vector<MixedItem> Mix(std::span<const Example> clean,
                           std::span<const PoisonedExample> poison,
                           double rate, std::uint64_t seed);

// Append mode: clean and poisoned sets in full, shuffled together.
std::vector<MixedItem> MixAppend(std::span<const Example> clean,
                                 std::span<const PoisonedExample> poison,
                                 std::uint64_t seed);

nlohmann::ordered_json PoisonedToJson(const PoisonedExample& p);
nlohmann::ordered_json MixedItemToJson(const MixedItem& item);

std::string SerializeRecords(std::span<const MixedItem> items);
std::string SerializePoisoned(std::span<const PoisonedExample> items);
void WriteRecords(const std::filesystem::path& path,
                  std::span<const MixedItem> items);
void WritePoisoned(const std::filesystem::path& path,
                   std::span<const PoisonedExample> items);

// Reads clean and poisoned records. Records whose DVQ does not parse are
// a FormatError here: these files are produced by this tool.
std::vector<MixedItem> LoadRecords(const std::filesystem::path& path);
std::vector<PoisonedExample> LoadPoisoned(const std::filesystem::path& path);

StatsReport PoisonStats(const Splits& splits,
                        const std::array<std::vector<PoisonedExample>, 3>&
                            poisoned_by_split);

}  // namespace backvis

#endif  // BACKVIS_POISONER_H_
