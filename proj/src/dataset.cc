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

#include "backvis/dataset.h"

#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <set>
#include <sstream>

#include "backvis/random.h"
#include "backvis/text.h"

namespace backvis {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view AttackSlug(AttackType attack) {
  switch (attack) {
    case AttackType::kDataExposure: return "exposure";
    case AttackType::kVisError: return "vis_error";
    case AttackType::kDoS: return "dos";
  }
  return "exposure";
}

std::string_view AttackDisplayName(AttackType attack) {
  switch (attack) {
    case AttackType::kDataExposure: return "Data Exposure";
    case AttackType::kVisError: return "Visualization Errors";
    case AttackType::kDoS: return "Denial of Service";
  }
  return "Data Exposure";
}

std::optional<AttackType> AttackFromSlug(std::string_view slug) {
  for (AttackType a : kAllAttacks) {
    if (AttackSlug(a) == slug) return a;
  }
  return std::nullopt;
}

std::string_view ColumnTypeName(ColumnType type) {
  return type == ColumnType::kStr ? "str" : "num";
}

namespace {

std::string_view UnqualifiedName(std::string_view column) {
  auto dot = column.rfind('.');
  return dot == std::string_view::npos ? column : column.substr(dot + 1);
}

const std::string& RequireString(const json& j, const char* field,
                                 std::size_t line) {
  auto it = j.find(field);
  if (it == j.end()) {
    throw FormatError(std::string("missing field '") + field + "'", line);
  }
  if (!it->is_string()) {
    throw FormatError(std::string("field '") + field + "' must be a string",
                      line);
  }
  return it->get_ref<const std::string&>();
}

}  // namespace

const Column* Schema::FindColumn(std::string_view column) const {
  std::string_view name = UnqualifiedName(column);
  for (const Table& t : tables) {
    for (const Column& c : t.columns) {
      if (EqualsIgnoreCase(c.name, name)) return &c;
    }
  }
  return nullptr;
}

void ValidateSchema(const Schema& schema) {
  std::set<std::string> tables;
  for (const Table& t : schema.tables) {
    if (!tables.insert(AsciiLower(t.name)).second) {
      throw FormatError("duplicate table '" + t.name + "'", 0);
    }
    std::set<std::string> columns;
    for (const Column& c : t.columns) {
      if (!columns.insert(AsciiLower(c.name)).second) {
        throw FormatError("duplicate column '" + c.name + "' in table '" +
                              t.name + "'",
                          0);
      }
    }
  }
}

Schema SchemaFromJson(const json& j, std::size_t line) {
  if (!j.is_object() || !j.contains("tables") || !j["tables"].is_array()) {
    throw FormatError("schema must be an object with a 'tables' array", line);
  }
  Schema schema;
  for (const json& tj : j["tables"]) {
    if (!tj.is_object()) throw FormatError("table must be an object", line);
    Table table;
    table.name = RequireString(tj, "name", line);
    if (tj.contains("columns")) {
      if (!tj["columns"].is_array()) {
        throw FormatError("'columns' must be an array", line);
      }
      for (const json& cj : tj["columns"]) {
        Column col;
        if (cj.is_string()) {
          col.name = cj.get<std::string>();
        } else if (cj.is_object()) {
          col.name = RequireString(cj, "name", line);
          auto type = cj.find("type");
          if (type != cj.end() && !type->is_null()) {
            if (!type->is_string()) {
              throw FormatError("column type must be \"str\" or \"num\"", line);
            }
            std::string t = AsciiLower(type->get<std::string>());
            if (t == "str") {
              col.type = ColumnType::kStr;
            } else if (t == "num") {
              col.type = ColumnType::kNum;
            } else {
              throw FormatError("unknown column type '" + t + "'", line);
            }
          }
        } else {
          throw FormatError("column must be an object or a string", line);
        }
        table.columns.push_back(std::move(col));
      }
    }
    schema.tables.push_back(std::move(table));
  }
  try {
    ValidateSchema(schema);
  } catch (const FormatError& e) {
    throw FormatError(e.what(), line);
  }
  return schema;
}

ordered_json SchemaToJson(const Schema& schema) {
  ordered_json tables = ordered_json::array();
  for (const Table& t : schema.tables) {
    ordered_json cols = ordered_json::array();
    for (const Column& c : t.columns) {
      ordered_json cj;
      cj["name"] = c.name;
      if (c.type) cj["type"] = ColumnTypeName(*c.type);
      cols.push_back(std::move(cj));
    }
    ordered_json tj;
    tj["name"] = t.name;
    tj["columns"] = std::move(cols);
    tables.push_back(std::move(tj));
  }
  ordered_json out;
  out["tables"] = std::move(tables);
  return out;
}

ordered_json ExampleToJson(const Example& ex) {
  ordered_json j;
  j["id"] = ex.id;
  j["nlq"] = ex.nlq;
  j["schema"] = SchemaToJson(ex.schema);
  j["dvq"] = ex.dvq;
  return j;
}

LoadResult ReadDataset(std::istream& in) {
  LoadResult result;
  std::set<std::string> ids;
  std::string raw;
  std::size_t line = 0;
  std::size_t records = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (Trim(raw).empty()) continue;
    ++records;
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), line);
    }
    if (!j.is_object()) throw FormatError("record must be a JSON object", line);
    Example ex;
    ex.id = RequireString(j, "id", line);
    ex.nlq = RequireString(j, "nlq", line);
    ex.dvq = RequireString(j, "dvq", line);
    if (!j.contains("schema")) throw FormatError("missing field 'schema'", line);
    ex.schema = SchemaFromJson(j["schema"], line);
    if (!ids.insert(ex.id).second) {
      throw FormatError("duplicate id '" + ex.id + "'", line);
    }
    try {
      ex.parsed = dvq::ParseDvq(ex.dvq);
    } catch (const dvq::SyntaxError& e) {
      result.rejects.push_back({line, ex.id, ex.dvq, e.what(), e.offset()});
      continue;
    } catch (const dvq::UnsupportedConstruct& e) {
      result.rejects.push_back({line, ex.id, ex.dvq, e.what(), e.offset()});
      continue;
    }
    result.examples.push_back(std::move(ex));
  }
  if (records == 0) throw EmptyDataset("dataset contains no records");
  return result;
}

LoadResult LoadDataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  return ReadDataset(in);
}

std::string SerializeDataset(std::span<const Example> examples) {
  std::string out;
  for (const Example& ex : examples) {
    out += ExampleToJson(ex).dump();
    out += '\n';
  }
  return out;
}

void WriteTextFile(const std::filesystem::path& path,
                   const std::string& contents) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << contents;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteDataset(const std::filesystem::path& path,
                  std::span<const Example> examples) {
  WriteTextFile(path, SerializeDataset(examples));
}

std::array<std::size_t, 3> SplitSizes(std::size_t n,
                                      const std::array<double, 3>& weights) {
  double sum = 0;
  for (double w : weights) {
    if (!(w >= 0) || !std::isfinite(w)) {
      throw InvalidArgument("split weights must be finite and non-negative");
    }
    sum += w;
  }
  if (!(sum > 0)) throw InvalidArgument("split weights must sum to > 0");
  auto share = [&](double w) {
    // The epsilon keeps exact ratios like 10 * 2 / 10 from landing just
    // below an integer.
    long double exact = static_cast<long double>(n) * w / sum;
    return static_cast<std::size_t>(std::floor(exact + 1e-9L));
  };
  std::size_t dev = share(weights[1]);
  std::size_t test = share(weights[2]);
  return {n - dev - test, dev, test};
}

Splits Split(std::span<const Example> examples, const SplitSpec& spec) {
  if (examples.size() < 3) {
    throw InvalidArgument("split requires at least 3 examples");
  }
  auto sizes = SplitSizes(examples.size(), spec.weights);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(DeriveSeed(spec.seed, "split", ""));
  rng.Shuffle(order);

  Splits out;
  std::size_t i = 0;
  for (; i < sizes[0]; ++i) out.train.push_back(examples[order[i]]);
  for (; i < sizes[0] + sizes[1]; ++i) out.dev.push_back(examples[order[i]]);
  for (; i < order.size(); ++i) out.test.push_back(examples[order[i]]);
  return out;
}

ColumnType InferColumnType(const Schema& schema, const dvq::Cond* cond,
                           std::string_view column) {
  const Column* declared = schema.FindColumn(column);
  if (declared && declared->type) return *declared->type;
  if (cond) {
    std::string_view name = UnqualifiedName(column);
    for (const dvq::Comparison& leaf : dvq::CollectLeaves(*cond)) {
      if (EqualsIgnoreCase(UnqualifiedName(leaf.column), name)) {
        return leaf.rhs.is_str() ? ColumnType::kStr : ColumnType::kNum;
      }
    }
  }
  if (declared) {
    throw UnknownColumn("no type for column '" + std::string(column) +
                        "': undeclared in schema and not compared to a literal");
  }
  throw UnknownColumn("unknown column '" + std::string(column) + "'");
}

StatsReport DatasetStats(const Splits& splits,
                         std::span<const AttackType> train_poison,
                         std::span<const AttackType> dev_poison,
                         std::span<const AttackType> test_poison) {
  StatsReport r;
  r.clean = {splits.train.size(), splits.dev.size(), splits.test.size()};
  const std::array<std::span<const AttackType>, 3> per_split = {
      train_poison, dev_poison, test_poison};
  for (std::size_t s = 0; s < 3; ++s) {
    for (AttackType a : per_split[s]) {
      ++r.poisoned[static_cast<std::size_t>(a)][s];
    }
  }
  return r;
}

ordered_json StatsReport::ToJson() const {
  auto row = [](const std::array<std::size_t, 3>& c) {
    ordered_json j;
    j["train"] = c[0];
    j["dev"] = c[1];
    j["test"] = c[2];
    return j;
  };
  ordered_json j;
  ordered_json poison;
  for (AttackType a : kAllAttacks) {
    poison[std::string(AttackSlug(a))] = row(poisoned[static_cast<std::size_t>(a)]);
  }
  j["poison"] = std::move(poison);
  j["clean"] = row(clean);
  return j;
}

std::string StatsReport::RenderTable() const {
  TextTable table({"Dataset", "Attack Type", "Train", "Dev", "Test"});
  bool first = true;
  for (AttackType a : kAllAttacks) {
    const auto& c = poisoned[static_cast<std::size_t>(a)];
    table.AddRow({first ? "Poison" : "", std::string(AttackDisplayName(a)),
                  std::to_string(c[0]), std::to_string(c[1]),
                  std::to_string(c[2])});
    first = false;
  }
  table.AddRule();
  table.AddRow({"Clean", "\\", std::to_string(clean[0]),
                std::to_string(clean[1]), std::to_string(clean[2])});
  return table.Render();
}

}  // namespace backvis
