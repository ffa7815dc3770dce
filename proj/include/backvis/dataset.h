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

// Text-to-vis corpora: one JSON record per line,
//
//   {"id": "...", "nlq": "...",
//    "schema": {"tables": [{"name": "wine",
//                           "columns": [{"name": "Price", "type": "num"}]}]},
//    "dvq": "Visualize BAR SELECT ..."}
//
// Column "type" is "str" or "num" and may be omitted.

#ifndef BACKVIS_DATASET_H_
#define BACKVIS_DATASET_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "backvis/attack.h"
#include "backvis/dvq.h"
#include "backvis/error.h"
#include "json.hpp"

namespace backvis {

enum class ColumnType { kStr, kNum };

struct Column {
  std::string name;
  std::optional<ColumnType> type;

  bool operator==(const Column&) const = default;
};

struct Table {
  std::string name;
  std::vector<Column> columns;

  bool operator==(const Table&) const = default;
};

struct Schema {
  std::vector<Table> tables;

  // Case-insensitive lookup. A qualified name ("T1.price") matches on the
  // part after the last dot. The first table declaring the column wins.
  const Column* FindColumn(std::string_view column) const;

  bool operator==(const Schema&) const = default;
};

// Throws FormatError on duplicate table names or duplicate columns.
void ValidateSchema(const Schema& schema);

struct Example {
  std::string id;
  std::string nlq;
  Schema schema;
  std::string dvq;      // as read from the corpus
  dvq::DVQuery parsed;  // ParseDvq(dvq)

  bool operator==(const Example&) const = default;
};

// Record whose DVQ did not parse.
struct RejectedRecord {
  std::size_t line = 0;
  std::string id;
  std::string dvq;
  std::string error;
  std::size_t offset = 0;
};

struct LoadResult {
  std::vector<Example> examples;
  std::vector<RejectedRecord> rejects;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class UnknownColumn : public Error {
 public:
  using Error::Error;
};

LoadResult LoadDataset(const std::filesystem::path& path);
LoadResult ReadDataset(std::istream& in);

// Field-level codec shared with the poisoned-record format.
Schema SchemaFromJson(const nlohmann::json& j, std::size_t line);
nlohmann::ordered_json SchemaToJson(const Schema& schema);
nlohmann::ordered_json ExampleToJson(const Example& example);

std::string SerializeDataset(std::span<const Example> examples);
void WriteDataset(const std::filesystem::path& path,
                  std::span<const Example> examples);
// Writes `contents` verbatim, creating parent directories.
void WriteTextFile(const std::filesystem::path& path,
                   const std::string& contents);
std::string ReadTextFile(const std::filesystem::path& path);

struct SplitSpec {
  std::array<double, 3> weights = {6, 2, 2};  // train, dev, test
  std::uint64_t seed = 0;
};

struct Splits {
  std::vector<Example> train;
  std::vector<Example> dev;
  std::vector<Example> test;
};

// Dev and test get floor(N * w / sum(w)); train takes the remainder.
std::array<std::size_t, 3> SplitSizes(std::size_t n,
                                      const std::array<double, 3>& weights);

// Seeded shuffle, then contiguous cut. Requires at least 3 examples.
Splits Split(std::span<const Example> examples, const SplitSpec& spec);

// Declared schema type when present; otherwise inferred from a literal the
// column is compared against in `cond` (quoted -> Str, numeric -> Num).
ColumnType InferColumnType(const Schema& schema, const dvq::Cond* cond,
                           std::string_view column);

std::string_view ColumnTypeName(ColumnType type);

// Instance counts per split, laid out like a data-partition table: one row
// per attack type plus the clean row.
struct StatsReport {
  std::array<std::size_t, 3> clean{};
  std::array<std::array<std::size_t, 3>, 3> poisoned{};  // [attack][split]

  nlohmann::ordered_json ToJson() const;
  std::string RenderTable() const;
};

StatsReport DatasetStats(const Splits& splits,
                         std::span<const AttackType> train_poison,
                         std::span<const AttackType> dev_poison,
                         std::span<const AttackType> test_poison);

}  // namespace backvis

#endif  // BACKVIS_DATASET_H_
