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

// The three DVQ payloads and a WHERE evaluator used to check them.
//
//   exposure:  WHERE c            ->  WHERE c OR C LIKE "%"     (C: Str)
//                                     WHERE c OR C != 0         (C: Num)
//   dos:       WHERE c            ->  WHERE c AND C = "abcdefg" (C: Str)
//                                     WHERE c AND C = -99999999999.0
//   vis error: VISUALIZE <chart>  ->  VISUALIZE BAR
//
// C is the column of the leftmost leaf of the original condition.

#ifndef BACKVIS_PAYLOADS_H_
#define BACKVIS_PAYLOADS_H_

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "backvis/dataset.h"
#include "backvis/dvq.h"

namespace backvis {

enum class PayloadKind { kExposureOr, kDosAnd, kVisBar };

// "exposure_or", "dos_and", "vis_bar".
std::string_view PayloadSlug(PayloadKind kind);
std::optional<PayloadKind> PayloadFromSlug(std::string_view slug);

inline constexpr std::string_view kDosStrSentinel = "abcdefg";
inline constexpr std::string_view kDosNumSentinel = "-99999999999.0";

struct PayloadRecord {
  PayloadKind kind = PayloadKind::kExposureOr;
  std::optional<std::string> target_column;       // exposure, dos
  std::optional<dvq::Comparison> injected_leaf;   // exposure, dos
  std::optional<dvq::ChartType> original_chart;   // vis error

  bool operator==(const PayloadRecord&) const = default;
};

struct PayloadResult {
  dvq::DVQuery query;
  PayloadRecord record;
};

class MissingWhere : public Error {
 public:
  using Error::Error;
};

class AlreadyBar : public Error {
 public:
  using Error::Error;
};

class MissingColumnValue : public Error {
 public:
  using Error::Error;
};

// Column of the leftmost leaf in an in-order traversal.
std::string SelectTargetColumn(const dvq::Cond& cond);

dvq::Comparison ExposureLeaf(std::string column, ColumnType type);
dvq::Comparison DosLeaf(std::string column, ColumnType type);

// Throws MissingWhere.
PayloadResult MakeExposurePayload(const dvq::DVQuery& query,
                                  const Schema& schema);
PayloadResult MakeDosPayload(const dvq::DVQuery& query, const Schema& schema);
// Throws AlreadyBar when the chart is exactly BAR.
PayloadResult ApplyVisError(const dvq::DVQuery& query);

struct CaseInsensitiveLess {
  using is_transparent = void;
  bool operator()(std::string_view a, std::string_view b) const;
};

using Row = std::map<std::string, dvq::Literal, CaseInsensitiveLess>;

// SQL-like LIKE with % and _ wildcards, ASCII case-insensitive.
bool LikeMatch(std::string_view value, std::string_view pattern);

// Two-valued evaluation of a condition on one row. Numbers compare by
// value; a string compared against a number is read as a number when it
// parses as one. Throws MissingColumnValue.
bool EvalWhere(const dvq::Cond& cond, const Row& row);
bool EvalComparison(const dvq::Comparison& cmp, const Row& row);

}  // namespace backvis

#endif  // BACKVIS_PAYLOADS_H_
