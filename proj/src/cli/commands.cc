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

#include "cli/commands.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "CLI11.hpp"
#include "backvis/dataset.h"
#include "backvis/defense.h"
#include "backvis/metrics.h"
#include "backvis/poisoner.h"
#include "backvis/text.h"
#include "backvis/victims.h"
#include "json.hpp"

namespace backvis::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// Config files are flat JSON objects keyed by long option name, the same
// shape as the run_config.json written next to every output. Items are
// routed to the subcommand named by `section`.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(std::string section) : section_(std::move(section)) {}

  std::string to_config(const CLI::App*, bool, bool,
                        std::string) const override {
    return {};
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw CLI::ConversionError("config", e.what());
    }
    if (!j.is_object()) {
      throw CLI::ConversionError("config", "expected a JSON object");
    }
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      if (key == "command") continue;
      CLI::ConfigItem item;
      if (!section_.empty()) item.parents = {section_};
      item.name = key;
      auto text = [](const json& v) {
        if (v.is_string()) return v.get<std::string>();
        return v.dump();
      };
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(text(v));
      } else {
        item.inputs.push_back(text(value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  std::string section_;
};

// CLI11 reads config files only at the top level, so a --config given after
// the subcommand is moved in front of it.
std::vector<std::string> HoistConfig(const std::vector<std::string>& args,
                                     std::string* subcommand) {
  std::size_t sub = args.size();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i].empty() || args[i][0] != '-') {
      sub = i;
      break;
    }
  }
  if (sub == args.size()) return args;
  *subcommand = args[sub];
  std::vector<std::string> hoisted(args.begin(), args.begin() + sub);
  std::vector<std::string> rest;
  for (std::size_t i = sub; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      hoisted.push_back(args[i]);
      hoisted.push_back(args[++i]);
    } else if (args[i].rfind("--config=", 0) == 0) {
      hoisted.push_back(args[i]);
    } else {
      rest.push_back(args[i]);
    }
  }
  hoisted.insert(hoisted.end(), rest.begin(), rest.end());
  return hoisted;
}

void WriteRunConfig(const CLI::App& sub, const fs::path& dir) {
  ordered_json j;
  j["command"] = sub.get_name();
  for (const CLI::Option* opt : sub.get_options()) {
    std::string name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    if (opt->get_expected_max() == 0) {
      j[name] = opt->count() > 0;
    } else if (!opt->results().empty()) {
      j[name] = opt->results().back();
    } else {
      j[name] = opt->get_default_str();
    }
  }
  WriteTextFile(dir / "run_config.json", j.dump(2) + "\n");
}

std::array<double, 3> ParseRatio3(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  if (parts.size() != 3) throw UsageError("ratio must look like 6:2:2");
  std::array<double, 3> w{};
  for (int i = 0; i < 3; ++i) {
    try {
      std::size_t used = 0;
      w[i] = std::stod(parts[i], &used);
      if (used != parts[i].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw UsageError("bad ratio component '" + parts[i] + "'");
    }
  }
  return w;
}

std::pair<std::size_t, std::size_t> ParseShotRatio(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("ratio must look like 15:5");
  auto num = [](const std::string& s) -> std::size_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw UsageError("bad ratio component '" + s + "'");
    }
    return std::stoul(s);
  };
  return {num(text.substr(0, colon)), num(text.substr(colon + 1))};
}

std::vector<double> ParseSweep(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  if (parts.size() != 3) throw UsageError("sweep must look like -50:500:10");
  std::array<double, 3> v{};
  for (int i = 0; i < 3; ++i) {
    try {
      v[i] = std::stod(parts[i]);
    } catch (const std::exception&) {
      throw UsageError("bad sweep component '" + parts[i] + "'");
    }
  }
  return ThresholdRange(v[0], v[1], v[2]);
}

std::vector<AttackType> ParseAttacks(const std::string& text) {
  if (text == "all") return {kAllAttacks.begin(), kAllAttacks.end()};
  std::vector<AttackType> out;
  std::string cur;
  auto flush = [&] {
    auto a = AttackFromSlug(cur);
    if (!a) throw UsageError("unknown attack '" + cur + "'");
    out.push_back(*a);
    cur.clear();
  };
  for (char c : text) {
    if (c == ',') {
      flush();
    } else {
      cur += c;
    }
  }
  flush();
  return out;
}

std::size_t Workers() {
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

std::string FileSafe(std::string_view id) {
  std::string out;
  for (char c : id) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
              c == '_' || c == '-' || c == '#';
    out += ok ? c : '_';
  }
  return out;
}

// Completion-service flags shared by poison and icl.
struct ClientFlags {
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string replay;
  std::size_t max_in_flight = 4;

  void Add(CLI::App* app) {
    app->add_option("--llm-base-url", base_url,
                    "OpenAI-compatible endpoint, e.g. https://api.openai.com");
    app->add_option("--llm-path", path, "Request path")->capture_default_str();
    app->add_option("--llm-model", model, "Model name");
    app->add_option("--llm-replay", replay,
                    "Replay canned completions from a JSONL file");
    app->add_option("--max-in-flight", max_in_flight,
                    "Concurrent completion requests")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  }

  bool configured() const {
    return !replay.empty() || (!base_url.empty() && !model.empty());
  }

  std::unique_ptr<CompletionClient> Make() const {
    if (!replay.empty()) {
      return std::make_unique<ReplayCompletionClient>(
          ReplayCompletionClient::FromFile(replay));
    }
    if (base_url.empty() || model.empty()) {
      throw UsageError(
          "the completion service needs --llm-base-url and --llm-model, or "
          "--llm-replay");
    }
    HttpClientConfig cfg;
    cfg.base_url = base_url;
    cfg.path = path;
    cfg.model = model;
    if (const char* key = std::getenv(kApiKeyEnv)) cfg.api_key = key;
    return std::make_unique<HttpCompletionClient>(cfg);
  }
};

class MemoEmbedder : public Embedder {
 public:
  explicit MemoEmbedder(const Embedder& inner) : inner_(inner) {}
  SparseVector Embed(std::string_view text) const override {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(std::string(text));
    if (it != cache_.end()) return it->second;
    return cache_.emplace(std::string(text), inner_.Embed(text)).first->second;
  }

 private:
  const Embedder& inner_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, SparseVector> cache_;
};

std::vector<Example> CleanOnly(const std::vector<MixedItem>& items) {
  std::vector<Example> out;
  for (const auto& item : items) {
    if (!IsPoisoned(item)) out.push_back(std::get<Example>(item));
  }
  return out;
}

// ---------------------------------------------------------------------------
// split

struct SplitArgs {
  std::string input;
  std::string ratio = "6:2:2";
  std::uint64_t seed = 0;
  std::string out = "splits";
};

void RunSplit(const CLI::App& sub, const SplitArgs& a, std::ostream& out,
              std::ostream& err) {
  SplitSpec spec;
  spec.weights = ParseRatio3(a.ratio);
  spec.seed = a.seed;
  LoadResult loaded = LoadDataset(a.input);
  for (const auto& r : loaded.rejects) {
    err << "warning: line " << r.line << " (" << r.id
        << "): dvq rejected: " << r.error << "\n";
  }
  Splits splits = Split(loaded.examples, spec);
  fs::path dir = a.out;
  WriteDataset(dir / "train.jsonl", splits.train);
  WriteDataset(dir / "dev.jsonl", splits.dev);
  WriteDataset(dir / "test.jsonl", splits.test);
  std::string rejects;
  for (const auto& r : loaded.rejects) {
    ordered_json j;
    j["line"] = r.line;
    j["id"] = r.id;
    j["dvq"] = r.dvq;
    j["error"] = r.error;
    j["offset"] = r.offset;
    rejects += j.dump() + "\n";
  }
  WriteTextFile(dir / "rejects.jsonl", rejects);
  StatsReport stats = DatasetStats(splits, {}, {}, {});
  WriteTextFile(dir / "stats.txt", stats.RenderTable());
  WriteTextFile(dir / "stats.json", stats.ToJson().dump(2) + "\n");
  WriteRunConfig(sub, dir);
  out << "train " << splits.train.size() << ", dev " << splits.dev.size()
      << ", test " << splits.test.size() << " (" << loaded.rejects.size()
      << " rejected)\n";
}

// ---------------------------------------------------------------------------
// poison

struct PoisonArgs {
  std::string splits = "splits";
  std::string out = "poisoned";
  std::string attack = "all";
  double rate = 0.5;
  std::string mode = "replace";
  std::string backend = "rule";
  std::uint64_t seed = 0;
  bool joint_eligibility = false;
  bool stacked_bar_as_bar = false;
  ClientFlags client;
};

void RunPoison(const CLI::App& sub, const PoisonArgs& a, std::ostream& out,
               std::ostream& err) {
  std::vector<AttackType> attacks = ParseAttacks(a.attack);
  if (!(a.rate >= 0 && a.rate <= 1)) {
    throw UsageError("--rate must be in [0, 1]");
  }
  TriggerBackend backend;
  std::unique_ptr<CompletionClient> client;
  if (a.backend == "llm") {
    if (!a.client.configured()) {
      throw UsageError(
          "--backend llm needs --llm-base-url and --llm-model, or "
          "--llm-replay");
    }
    client = a.client.Make();
    backend.kind = TriggerBackend::Kind::kLlm;
    backend.client = client.get();
    backend.max_in_flight = a.client.max_in_flight;
  }
  EligibilityPolicy policy;
  policy.joint_conditions = a.joint_eligibility;
  policy.stacked_bar_counts_as_bar = a.stacked_bar_as_bar;

  fs::path in = a.splits;
  Splits splits;
  splits.train = LoadDataset(in / "train.jsonl").examples;
  splits.dev = LoadDataset(in / "dev.jsonl").examples;
  splits.test = LoadDataset(in / "test.jsonl").examples;

  fs::path dir = a.out;
  const std::array<const std::vector<Example>*, 3> parts = {
      &splits.train, &splits.dev, &splits.test};
  const std::array<const char*, 3> names = {"train", "dev", "test"};
  std::array<std::vector<PoisonedExample>, 3> poisoned;
  std::string failures;
  std::size_t fallbacks = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    PoisonSetResult r =
        BuildPoisonSet(*parts[s], attacks, policy, backend, a.seed);
    fallbacks += r.fallbacks;
    for (const auto& f : r.failures) {
      ordered_json j;
      j["split"] = names[s];
      j["clean_id"] = f.clean_id;
      j["attack"] = AttackSlug(f.attack);
      j["error"] = f.error;
      failures += j.dump() + "\n";
    }
    poisoned[s] = std::move(r.poisoned);
    WritePoisoned(dir / "poisoned" / (std::string(names[s]) + ".jsonl"),
                  poisoned[s]);
    for (AttackType at : attacks) {
      std::vector<PoisonedExample> only;
      for (const auto& p : poisoned[s]) {
        if (p.attack == at) only.push_back(p);
      }
      WritePoisoned(dir / "poisoned" /
                        (std::string(names[s]) + "_" +
                         std::string(AttackSlug(at)) + ".jsonl"),
                    only);
    }
  }
  WriteTextFile(dir / "failures.jsonl", failures);

  std::vector<MixedItem> mix;
  if (a.mode == "append") {
    mix = MixAppend(splits.train, poisoned[0], a.seed);
  } else {
    mix = Mix(splits.train, poisoned[0], a.rate, a.seed);
  }
  WriteRecords(dir / "train_mix.jsonl", mix);
  WriteRecords(dir / "test_mixed.jsonl",
               MixAppend(splits.test, poisoned[2], a.seed));

  std::size_t mix_poison = 0;
  for (const auto& item : mix) mix_poison += IsPoisoned(item);
  StatsReport stats = PoisonStats(splits, poisoned);
  std::string summary = stats.RenderTable();
  summary += "train mix (" + a.mode + "): " +
             std::to_string(mix.size() - mix_poison) + " clean + " +
             std::to_string(mix_poison) + " poisoned\n";
  WriteTextFile(dir / "stats.txt", summary);
  ordered_json sj = stats.ToJson();
  sj["mix"] = {{"mode", a.mode},
               {"rate", a.rate},
               {"clean", mix.size() - mix_poison},
               {"poison", mix_poison}};
  sj["failures"] = std::count(failures.begin(), failures.end(), '\n');
  sj["trigger_fallbacks"] = fallbacks;
  WriteTextFile(dir / "stats.json", sj.dump(2) + "\n");
  WriteRunConfig(sub, dir);
  out << summary;
  if (!failures.empty()) {
    err << "warning: some examples could not be poisoned; see "
        << (dir / "failures.jsonl").string() << "\n";
  }
}

// ---------------------------------------------------------------------------
// mock

struct MockArgs {
  std::string memory;
  std::vector<std::string> targets;
  double fidelity = 1.0;
  std::uint64_t seed = 0;
  bool no_memorize_targets = false;
  std::string out = "mock";
};

std::vector<MixedItem> LoadAll(const std::vector<std::string>& paths) {
  std::vector<MixedItem> all;
  for (const auto& p : paths) {
    auto items = LoadRecords(p);
    all.insert(all.end(), std::make_move_iterator(items.begin()),
               std::make_move_iterator(items.end()));
  }
  return all;
}

void RunMock(const CLI::App& sub, const MockArgs& a, std::ostream& out,
             std::ostream&) {
  MockVictimConfig cfg{a.fidelity, a.seed};
  try {
    cfg.Validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  std::vector<MixedItem> memory = LoadRecords(a.memory);
  std::vector<MixedItem> targets = LoadAll(a.targets);
  if (!a.no_memorize_targets) {
    memory.insert(memory.end(), targets.begin(), targets.end());
  }
  MockVictim victim(memory, cfg);
  std::vector<PredictionRecord> preds(targets.size());
  ParallelFor(targets.size(), Workers(),
              [&](std::size_t i) { preds[i] = victim.Predict(targets[i]); });
  fs::path dir = a.out;
  WritePredictions(dir / "predictions.jsonl", preds);
  WriteRunConfig(sub, dir);
  out << "wrote " << preds.size() << " predictions to "
      << (dir / "predictions.jsonl").string() << "\n";
}

// ---------------------------------------------------------------------------
// icl

struct IclArgs {
  std::vector<std::string> targets;
  std::string poison_pool;
  std::string clean_pool;
  std::size_t k = 1;
  std::string ratio;
  std::size_t limit = 0;
  std::string out = "icl";
  ClientFlags client;
};

void RunIcl(const CLI::App& sub, const IclArgs& a, std::ostream& out,
            std::ostream&) {
  PromptSpec spec;
  spec.k = a.k;
  if (a.ratio.empty()) {
    spec.k_poison = 0;
    spec.k_clean = a.k;
  } else {
    std::tie(spec.k_poison, spec.k_clean) = ParseShotRatio(a.ratio);
  }
  try {
    spec.Validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  std::vector<MixedItem> targets = LoadAll(a.targets);
  if (a.limit > 0 && targets.size() > a.limit) targets.resize(a.limit);

  std::vector<Example> poison_pool;
  if (!a.poison_pool.empty()) {
    for (const auto& item : LoadRecords(a.poison_pool)) {
      if (IsPoisoned(item)) poison_pool.push_back(ExampleOf(item));
    }
  }
  std::vector<Example> clean_pool;
  if (!a.clean_pool.empty()) clean_pool = CleanOnly(LoadRecords(a.clean_pool));

  std::vector<std::string> corpus;
  for (const auto& e : poison_pool) corpus.push_back(e.nlq);
  for (const auto& e : clean_pool) corpus.push_back(e.nlq);
  TfEmbedder tf(corpus);
  MemoEmbedder embedder(tf);

  fs::path dir = a.out;
  std::vector<std::string> prompts(targets.size());
  ParallelFor(targets.size(), Workers(), [&](std::size_t i) {
    prompts[i] = BuildIclPrompt(ExampleOf(targets[i]), poison_pool, clean_pool,
                                spec, embedder);
  });
  for (std::size_t i = 0; i < targets.size(); ++i) {
    WriteTextFile(dir / "prompts" / (FileSafe(ExampleOf(targets[i]).id) + ".txt"),
                  prompts[i]);
  }
  if (a.client.configured()) {
    std::unique_ptr<CompletionClient> client = a.client.Make();
    std::vector<PredictionRecord> preds(targets.size());
    ParallelFor(targets.size(), a.client.max_in_flight, [&](std::size_t i) {
      preds[i] = LlmPredict(ExampleOf(targets[i]).id, prompts[i], *client);
    });
    WritePredictions(dir / "predictions.jsonl", preds);
  }
  WriteRunConfig(sub, dir);
  out << "wrote " << prompts.size() << " prompts ("
      << spec.k_poison << " poisoned + " << spec.k_clean
      << " clean shots each)\n";
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string predictions;
  std::string refs;
  std::string poisoned_refs;
  bool per_attack = false;
  std::string out;
};

void RunEvaluate(const CLI::App& sub, const EvaluateArgs& a, std::ostream& out,
                 std::ostream& err) {
  if (a.refs.empty() && a.poisoned_refs.empty()) {
    throw UsageError("evaluate needs --refs and/or --poisoned-refs");
  }
  std::vector<std::string> warnings;
  std::vector<PredictionRecord> preds = LoadPredictions(a.predictions, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";

  std::vector<Example> refs;
  if (!a.refs.empty()) {
    LoadResult loaded = LoadDataset(a.refs);
    if (!loaded.rejects.empty()) {
      err << "warning: " << loaded.rejects.size()
          << " reference records with unparseable dvq were skipped\n";
    }
    refs = std::move(loaded.examples);
  }
  std::vector<PoisonedExample> prefs;
  if (!a.poisoned_refs.empty()) prefs = LoadPoisoned(a.poisoned_refs);

  std::unordered_set<std::string> clean_ids, poison_ids;
  for (const auto& r : refs) clean_ids.insert(r.id);
  for (const auto& r : prefs) poison_ids.insert(r.example.id);
  std::vector<PredictionRecord> clean_preds, poison_preds;
  for (const auto& p : preds) {
    if (clean_ids.count(p.example_id)) {
      clean_preds.push_back(p);
    } else if (poison_ids.count(p.example_id)) {
      poison_preds.push_back(p);
    } else {
      throw UnknownExampleId("prediction for unknown example '" +
                             p.example_id + "'");
    }
  }

  ordered_json report;
  std::string text;
  if (!a.refs.empty()) {
    MetricsReport m = ScoreAccuracy(clean_preds, refs);
    report["clean"] = m.ToJson();
    text += RenderMetricsTable(m);
    if (m.predicted < m.n) {
      text += "coverage: " + std::to_string(m.predicted) + " of " +
              std::to_string(m.n) +
              " clean references have a prediction; the rest count as "
              "failures\n";
    }
  }
  if (!a.poisoned_refs.empty()) {
    AsrReport r = ScoreAsr(poison_preds, prefs);
    report["asr"] = r.ToJson();
    if (!text.empty()) text += "\n";
    text += RenderAsrTable(r, a.per_attack);
    if (r.predicted < r.overall.n) {
      text += "coverage: " + std::to_string(r.predicted) + " of " +
              std::to_string(r.overall.n) +
              " poisoned references have a prediction; the rest count as "
              "failures\n";
    }
  }
  out << text;
  if (!a.out.empty()) {
    fs::path dir = a.out;
    WriteTextFile(dir / "report.txt", text);
    WriteTextFile(dir / "metrics.json", report.dump(2) + "\n");
    WriteRunConfig(sub, dir);
  }
}

// ---------------------------------------------------------------------------
// defend

struct DefendArgs {
  std::string kind;
  std::string records;
  std::string lm_corpus;
  std::string sweep = "-50:500:10";
  std::string victim = "mock";
  std::string memory;
  double fidelity = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_perturbations = kMaxPerturbations;
  bool no_memorize_targets = false;
  std::string out = "defense";
};

void RunDefend(const CLI::App& sub, const DefendArgs& a, std::ostream& out,
               std::ostream& err) {
  std::vector<MixedItem> items = LoadRecords(a.records);
  ScoredSet scored;
  SweepResult result;
  if (a.kind == "onion") {
    if (a.lm_corpus.empty()) throw UsageError("onion needs --lm-corpus");
    std::vector<double> thresholds = ParseSweep(a.sweep);
    std::vector<std::string> corpus;
    for (const auto& e : CleanOnly(LoadRecords(a.lm_corpus))) {
      corpus.push_back(e.nlq);
    }
    BigramLM lm = BigramLM::Train(corpus);
    scored = OnionScores(lm, items);
    result = Sweep(scored.scores, scored.poisoned, thresholds);
  } else {
    MockVictimConfig cfg{a.fidelity, a.seed};
    try {
      cfg.Validate();
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    if (a.memory.empty()) throw UsageError("semantic needs --memory");
    std::vector<MixedItem> memory = LoadRecords(a.memory);
    if (!a.no_memorize_targets) {
      memory.insert(memory.end(), items.begin(), items.end());
    }
    MockVictim victim(memory, cfg);
    ItemVictimFn fn = [&](const MixedItem& base, std::string_view nlq) {
      const Example& ex = ExampleOf(base);
      return victim.Translate(ex.id, nlq, ex.schema);
    };
    TokenF1Similarity sim;
    scored = SemanticScores(fn, items, sim, a.max_perturbations, Workers());
    result = Sweep(scored.scores, scored.poisoned, SemanticThresholds());
  }
  for (const auto& w : scored.warnings) err << "warning: " << w << "\n";

  const SweepRow& best = result.Best();
  std::string text = result.RenderTable();
  text += "best F1 " + FormatFixed(best.f1, 4) + " at threshold " +
          FormatDouble(best.threshold) + " (precision " +
          FormatFixed(best.precision, 4) + ", recall " +
          FormatFixed(best.recall, 4) + ")\n";

  fs::path dir = a.out;
  std::string scores;
  for (std::size_t i = 0; i < items.size(); ++i) {
    ordered_json j;
    j["id"] = ExampleOf(items[i]).id;
    j["poisoned"] = static_cast<bool>(scored.poisoned[i]);
    if (std::isfinite(scored.scores[i])) {
      j["score"] = scored.scores[i];
    } else {
      j["score"] = nullptr;
    }
    scores += j.dump() + "\n";
  }
  WriteTextFile(dir / "scores.jsonl", scores);
  WriteTextFile(dir / "sweep.txt", text);
  ordered_json sj;
  sj["kind"] = a.kind;
  sj["rows"] = result.ToJson();
  sj["best"] = {{"threshold", best.threshold}, {"f1", best.f1}};
  WriteTextFile(dir / "sweep.json", sj.dump(2) + "\n");
  WriteRunConfig(sub, dir);
  out << text;
}

// ---------------------------------------------------------------------------

bool IsUsageError(const Error& e) {
  return dynamic_cast<const UsageError*>(&e) ||
         dynamic_cast<const InvalidArgument*>(&e) ||
         dynamic_cast<const IoError*>(&e) ||
         dynamic_cast<const FormatError*>(&e) ||
         dynamic_cast<const EmptyDataset*>(&e);
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Backdoor poisoning toolkit for text-to-visualization models",
               "backvis"};
  app.require_subcommand(1);
  std::string subcommand;
  const std::vector<std::string> hoisted = HoistConfig(args, &subcommand);
  app.config_formatter(std::make_shared<JsonConfig>(subcommand));
  app.set_config("--config", "",
                 "JSON file of subcommand option values; flags win");
  auto add_common = [](CLI::App* sub, std::string& out_dir) {
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
  };

  SplitArgs split;
  CLI::App* split_cmd = app.add_subcommand("split", "Seeded train/dev/test split");
  split_cmd->add_option("dataset", split.input, "Dataset JSONL")->required();
  split_cmd->add_option("--ratio", split.ratio, "train:dev:test weights")
      ->capture_default_str();
  split_cmd->add_option("--seed", split.seed, "Global seed")->capture_default_str();
  add_common(split_cmd, split.out);

  PoisonArgs poison;
  CLI::App* poison_cmd =
      app.add_subcommand("poison", "Build poisoned sets and the training mix");
  poison_cmd->add_option("--splits", poison.splits,
                         "Directory with train/dev/test.jsonl")
      ->capture_default_str();
  poison_cmd->add_option("--attack", poison.attack,
                         "all, or a comma list of exposure,vis_error,dos")
      ->capture_default_str();
  poison_cmd->add_option("--rate", poison.rate, "Poisoning rate (replace mode)")
      ->capture_default_str();
  poison_cmd->add_option("--mode", poison.mode, "replace or append")
      ->check(CLI::IsMember({"replace", "append"}))
      ->capture_default_str();
  poison_cmd->add_option("--backend", poison.backend,
                         "First-word rewriting: rule or llm")
      ->check(CLI::IsMember({"rule", "llm"}))
      ->capture_default_str();
  poison_cmd->add_option("--seed", poison.seed, "Global seed")->capture_default_str();
  poison_cmd->add_flag("--joint-eligibility", poison.joint_eligibility,
                       "Exposure and vis-error need both WHERE and a non-BAR chart");
  poison_cmd->add_flag("--stacked-bar-as-bar", poison.stacked_bar_as_bar,
                       "Treat STACKED BAR as BAR for vis-error eligibility");
  poison.client.Add(poison_cmd);
  add_common(poison_cmd, poison.out);

  MockArgs mock;
  CLI::App* mock_cmd =
      app.add_subcommand("mock", "Predictions from the mock backdoored victim");
  mock_cmd->add_option("--memory", mock.memory, "Training records (e.g. train_mix.jsonl)")
      ->required();
  mock_cmd->add_option("--targets", mock.targets, "Records to predict")
      ->required();
  mock_cmd->add_option("--fidelity", mock.fidelity,
                       "Probability a triggered input yields the payload")
      ->capture_default_str();
  mock_cmd->add_option("--seed", mock.seed, "Global seed")->capture_default_str();
  mock_cmd->add_flag("--no-memorize-targets", mock.no_memorize_targets,
                     "Do not add the targets' clean pairs to the memory");
  add_common(mock_cmd, mock.out);

  IclArgs icl;
  CLI::App* icl_cmd = app.add_subcommand("icl", "In-context learning prompts");
  icl_cmd->add_option("--targets", icl.targets, "Records to build prompts for")
      ->required();
  icl_cmd->add_option("--poison-pool", icl.poison_pool, "Poisoned records");
  icl_cmd->add_option("--clean-pool", icl.clean_pool, "Clean records");
  icl_cmd->add_option("--k", icl.k, "Shots per prompt")->capture_default_str();
  icl_cmd->add_option("--ratio", icl.ratio, "poisoned:clean shots, summing to k");
  icl_cmd->add_option("--limit", icl.limit, "Only the first N targets (0 = all)");
  icl.client.Add(icl_cmd);
  add_common(icl_cmd, icl.out);

  EvaluateArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Accuracy and ASR");
  eval_cmd->add_option("--predictions", eval.predictions, "Predictions JSONL")
      ->required();
  eval_cmd->add_option("--refs", eval.refs, "Clean reference dataset");
  eval_cmd->add_option("--poisoned-refs", eval.poisoned_refs,
                       "Poisoned reference records");
  eval_cmd->add_flag("--per-attack", eval.per_attack, "One ASR row per attack");
  eval_cmd->add_option("--out", eval.out, "Also write reports here");

  DefendArgs defend;
  CLI::App* defend_cmd = app.add_subcommand("defend", "Defense threshold sweeps");
  defend_cmd->add_option("kind", defend.kind, "onion or semantic")
      ->required()
      ->check(CLI::IsMember({"onion", "semantic"}));
  defend_cmd->add_option("--records", defend.records,
                         "Labeled records (e.g. test_mixed.jsonl)")
      ->required();
  defend_cmd->add_option("--lm-corpus", defend.lm_corpus,
                         "Clean records for the language model (onion)");
  defend_cmd->add_option("--sweep", defend.sweep, "lo:hi:step (onion)")
      ->capture_default_str();
  defend_cmd->add_option("--victim", defend.victim, "Victim model (semantic)")
      ->check(CLI::IsMember({"mock"}))
      ->capture_default_str();
  defend_cmd->add_option("--memory", defend.memory,
                         "Mock victim training records (semantic)");
  defend_cmd->add_option("--fidelity", defend.fidelity, "Mock victim fidelity")
      ->capture_default_str();
  defend_cmd->add_option("--seed", defend.seed, "Global seed")->capture_default_str();
  defend_cmd->add_option("--max-perturbations", defend.max_perturbations,
                         "Deletions per question (semantic)")
      ->capture_default_str();
  defend_cmd->add_flag("--no-memorize-targets", defend.no_memorize_targets,
                       "Do not add the records' clean pairs to the memory");
  add_common(defend_cmd, defend.out);

  try {
    std::vector<std::string> reversed(hoisted.rbegin(), hoisted.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (split_cmd->parsed()) RunSplit(*split_cmd, split, out, err);
    if (poison_cmd->parsed()) RunPoison(*poison_cmd, poison, out, err);
    if (mock_cmd->parsed()) RunMock(*mock_cmd, mock, out, err);
    if (icl_cmd->parsed()) RunIcl(*icl_cmd, icl, out, err);
    if (eval_cmd->parsed()) RunEvaluate(*eval_cmd, eval, out, err);
    if (defend_cmd->parsed()) RunDefend(*defend_cmd, defend, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return IsUsageError(e) ? kExitUsage : kExitInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace backvis::cli
