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

// Data visualization queries (DVQs): a chart clause followed by a SQL-like
// body, e.g.
//
//   Visualize BAR SELECT Winery , COUNT(Winery) FROM WINE
//       WHERE Price > 100 GROUP BY Winery ORDER BY COUNT(Winery) DESC
//
// Grammar accepted by ParseDvq (keywords are case-insensitive):
//
//   query   := VISUALIZE chart SELECT item {, item} FROM table {join}
//              [WHERE cond] {GROUP BY ident {, ident}
//                           | ORDER BY item [ASC|DESC]
//                           | BIN ident BY (YEAR|MONTH|DAY|WEEKDAY)}
//   chart   := BAR | PIE | LINE | SCATTER | STACKED BAR
//            | (GROUPED|GROUPING) LINE | (GROUPED|GROUPING) SCATTER
//   item    := (COUNT|SUM|AVG|MIN|MAX) ( (ident|*) ) | ident
//   table   := ident [AS ident]
//   join    := JOIN table ON ident = ident
//   cond    := conj {OR conj};   conj := atom {AND atom}
//   atom    := ( cond ) | ident (=|!=|<>|<|>|<=|>=|LIKE) literal
//
// The trailing clauses may appear in any order, each at most once. The AST
// does not remember their order; serialization emits GROUP BY, ORDER BY,
// BIN.

#ifndef BACKVIS_DVQ_H_
#define BACKVIS_DVQ_H_

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "backvis/error.h"

namespace backvis::dvq {

enum class ChartType {
  kBar,
  kPie,
  kLine,
  kScatter,
  kStackedBar,
  kGroupedLine,
  kGroupedScatter,
};

// "BAR", "STACKED BAR", "GROUPED LINE", ...
std::string_view ChartKeyword(ChartType chart);
// Inverse of ChartKeyword; also accepts "GROUPING" and underscores.
std::optional<ChartType> ChartFromKeyword(std::string_view keyword);

class Literal {
 public:
  enum class Kind { kStr, kNum };

  static Literal Str(std::string value);
  // `written` must be a decimal number, optionally signed, optionally with
  // an exponent. The spelling is kept for serialization.
  static Literal Num(std::string_view written);
  static Literal Num(double value);

  Kind kind() const { return kind_; }
  bool is_str() const { return kind_ == Kind::kStr; }
  bool is_num() const { return kind_ == Kind::kNum; }
  // Unquoted value for strings; the spelling as written for numbers.
  const std::string& text() const { return text_; }
  double number() const { return number_; }

  // Structural: numbers compare by spelling. Use ValueEquals for 100 vs
  // 100.0.
  bool operator==(const Literal&) const = default;
  bool ValueEquals(const Literal& other) const;

 private:
  Literal(Kind kind, std::string text, double number)
      : kind_(kind), text_(std::move(text)), number_(number) {}

  Kind kind_;
  std::string text_;
  double number_;
};

enum class CompareOp { kEq, kNe, kLtGt, kLt, kGt, kLe, kGe, kLike };

std::string_view CompareOpText(CompareOp op);

struct Comparison {
  std::string column;
  CompareOp op = CompareOp::kEq;
  Literal rhs = Literal::Num(0.0);

  bool operator==(const Comparison&) const = default;
};

// Immutable condition tree. Copies share nodes.
class Cond {
 public:
  enum class Kind { kLeaf, kAnd, kOr };

  static Cond Leaf(Comparison cmp);
  static Cond And(Cond lhs, Cond rhs);
  static Cond Or(Cond lhs, Cond rhs);

  Kind kind() const;
  bool is_leaf() const { return kind() == Kind::kLeaf; }
  // Valid only for leaves.
  const Comparison& leaf() const;
  // Valid only for And/Or.
  const Cond& lhs() const;
  const Cond& rhs() const;

  bool operator==(const Cond& other) const;

 private:
  struct Node;
  explicit Cond(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

// Leaves in left-to-right order.
std::vector<Comparison> CollectLeaves(const Cond& cond);

enum class Aggregate { kCount, kSum, kAvg, kMin, kMax };

struct SelectExpr {
  std::optional<Aggregate> aggregate;
  std::string column;  // "*" only under an aggregate

  bool operator==(const SelectExpr&) const = default;
};

struct TableRef {
  std::string name;
  std::optional<std::string> alias;

  bool operator==(const TableRef&) const = default;
};

struct Join {
  TableRef table;
  std::string left_column;
  std::string right_column;

  bool operator==(const Join&) const = default;
};

enum class SortDirection { kAsc, kDesc };

struct OrderBy {
  SelectExpr expr;
  std::optional<SortDirection> direction;

  bool operator==(const OrderBy&) const = default;
};

enum class BinUnit { kYear, kMonth, kDay, kWeekday };

struct Bin {
  std::string column;
  BinUnit unit = BinUnit::kYear;

  bool operator==(const Bin&) const = default;
};

struct DVQuery {
  ChartType chart = ChartType::kBar;
  std::vector<SelectExpr> select;
  TableRef from;
  std::vector<Join> joins;
  std::optional<Cond> where;
  std::vector<std::string> group_by;  // empty = no GROUP BY
  std::optional<OrderBy> order_by;
  std::optional<Bin> bin;

  bool operator==(const DVQuery&) const = default;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, std::set<std::string> expected,
              std::string found);

  std::size_t offset() const { return offset_; }
  const std::set<std::string>& expected() const { return expected_; }
  const std::string& found() const { return found_; }

 private:
  std::size_t offset_;
  std::set<std::string> expected_;
  std::string found_;
};

// Input that is well-formed SQL but outside the supported grammar
// (HAVING, BETWEEN, IN, subqueries, ...).
class UnsupportedConstruct : public Error {
 public:
  UnsupportedConstruct(std::size_t offset, std::string construct);

  std::size_t offset() const { return offset_; }
  const std::string& construct() const { return construct_; }

 private:
  std::size_t offset_;
  std::string construct_;
};

DVQuery ParseDvq(std::string_view text);
// A bare condition, as it would follow WHERE.
Cond ParseCond(std::string_view text);

// Canonical text: uppercase keywords, single spaces, " , " between list
// items, double-quoted strings, and parentheses wherever the default
// precedence (AND over OR, left associative) would re-associate the tree.
std::string SerializeDvq(const DVQuery& query);
std::string SerializeCond(const Cond& cond);
std::string SerializeComparison(const Comparison& cmp);
std::string SerializeLiteral(const Literal& lit);
std::string SerializeSelectExpr(const SelectExpr& expr);

// Case-folds identifiers, rewrites numbers to a value-canonical spelling,
// turns <> into != and fills in ASC for an ORDER BY without a direction.
DVQuery NormalizeDvq(const DVQuery& query);
Comparison NormalizeComparison(const Comparison& cmp);
Cond NormalizeCond(const Cond& cond);

// Canonical spelling of a number: integers without a fraction, everything
// else in shortest round-trip form.
std::string CanonicalNumber(double value);

}  // namespace backvis::dvq

#endif  // BACKVIS_DVQ_H_
