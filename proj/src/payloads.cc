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

#include "backvis/payloads.h"

#include <algorithm>
#include <charconv>
#include <vector>

#include "backvis/text.h"

namespace backvis {

using dvq::CompareOp;
using dvq::Comparison;
using dvq::Cond;
using dvq::Literal;

std::string_view PayloadSlug(PayloadKind kind) {
  switch (kind) {
    case PayloadKind::kExposureOr: return "exposure_or";
    case PayloadKind::kDosAnd: return "dos_and";
    case PayloadKind::kVisBar: return "vis_bar";
  }
  return "exposure_or";
}

std::optional<PayloadKind> PayloadFromSlug(std::string_view slug) {
  for (PayloadKind k : {PayloadKind::kExposureOr, PayloadKind::kDosAnd,
                        PayloadKind::kVisBar}) {
    if (PayloadSlug(k) == slug) return k;
  }
  return std::nullopt;
}

std::string SelectTargetColumn(const Cond& cond) {
  const Cond* c = &cond;
  while (!c->is_leaf()) c = &c->lhs();
  return c->leaf().column;
}

Comparison ExposureLeaf(std::string column, ColumnType type) {
  if (type == ColumnType::kStr) {
    return Comparison{std::move(column), CompareOp::kLike, Literal::Str("%")};
  }
  return Comparison{std::move(column), CompareOp::kNe, Literal::Num("0")};
}

Comparison DosLeaf(std::string column, ColumnType type) {
  if (type == ColumnType::kStr) {
    return Comparison{std::move(column), CompareOp::kEq,
                      Literal::Str(std::string(kDosStrSentinel))};
  }
  return Comparison{std::move(column), CompareOp::kEq,
                    Literal::Num(kDosNumSentinel)};
}

namespace {

PayloadResult WrapWhere(const dvq::DVQuery& query, const Schema& schema,
                        PayloadKind kind) {
  if (!query.where) {
    throw MissingWhere("payload needs a WHERE clause");
  }
  std::string column = SelectTargetColumn(*query.where);
  ColumnType type = InferColumnType(schema, &*query.where, column);
  PayloadResult out{query, {}};
  out.record.kind = kind;
  out.record.target_column = column;
  if (kind == PayloadKind::kExposureOr) {
    Comparison leaf = ExposureLeaf(column, type);
    out.query.where = Cond::Or(*query.where, Cond::Leaf(leaf));
    out.record.injected_leaf = std::move(leaf);
  } else {
    Comparison leaf = DosLeaf(column, type);
    out.query.where = Cond::And(*query.where, Cond::Leaf(leaf));
    out.record.injected_leaf = std::move(leaf);
  }
  return out;
}

std::optional<double> AsNumber(const Literal& lit) {
  if (lit.is_num()) return lit.number();
  std::string_view s = Trim(lit.text());
  if (s.empty()) return std::nullopt;
  try {
    return Literal::Num(s).number();
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

std::string AsText(const Literal& lit) {
  return lit.is_str() ? lit.text() : dvq::CanonicalNumber(lit.number());
}

template <typename T>
bool Compare(const T& a, CompareOp op, const T& b) {
  switch (op) {
    case CompareOp::kEq: return a == b;
    case CompareOp::kNe:
    case CompareOp::kLtGt: return !(a == b);
    case CompareOp::kLt: return a < b;
    case CompareOp::kGt: return b < a;
    case CompareOp::kLe: return !(b < a);
    case CompareOp::kGe: return !(a < b);
    case CompareOp::kLike: break;
  }
  return false;
}

const Literal& Lookup(const Row& row, const std::string& column) {
  auto it = row.find(column);
  if (it == row.end()) {
    auto dot = column.rfind('.');
    if (dot != std::string::npos) it = row.find(column.substr(dot + 1));
  }
  if (it == row.end()) {
    throw MissingColumnValue("row has no value for column '" + column + "'");
  }
  return it->second;
}

}  // namespace

PayloadResult MakeExposurePayload(const dvq::DVQuery& query,
                                  const Schema& schema) {
  return WrapWhere(query, schema, PayloadKind::kExposureOr);
}

PayloadResult MakeDosPayload(const dvq::DVQuery& query, const Schema& schema) {
  return WrapWhere(query, schema, PayloadKind::kDosAnd);
}

PayloadResult ApplyVisError(const dvq::DVQuery& query) {
  if (query.chart == dvq::ChartType::kBar) {
    throw AlreadyBar("chart is already BAR");
  }
  PayloadResult out{query, {}};
  out.query.chart = dvq::ChartType::kBar;
  out.record.kind = PayloadKind::kVisBar;
  out.record.original_chart = query.chart;
  return out;
}

bool CaseInsensitiveLess::operator()(std::string_view a,
                                     std::string_view b) const {
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    char x = a[i], y = b[i];
    if (x >= 'A' && x <= 'Z') x = static_cast<char>(x - 'A' + 'a');
    if (y >= 'A' && y <= 'Z') y = static_cast<char>(y - 'A' + 'a');
    if (x != y) {
      return static_cast<unsigned char>(x) < static_cast<unsigned char>(y);
    }
  }
  return a.size() < b.size();
}

bool LikeMatch(std::string_view value, std::string_view pattern) {
  std::string v = AsciiLower(value);
  std::string p = AsciiLower(pattern);
  // Iterative wildcard matching with single-star backtracking.
  std::size_t vi = 0, pi = 0;
  std::size_t star = std::string::npos, mark = 0;
  while (vi < v.size()) {
    if (pi < p.size() && p[pi] == '%') {
      star = pi++;
      mark = vi;
    } else if (pi < p.size() && (p[pi] == '_' || p[pi] == v[vi])) {
      ++vi;
      ++pi;
    } else if (star != std::string::npos) {
      pi = star + 1;
      vi = ++mark;
    } else {
      return false;
    }
  }
  while (pi < p.size() && p[pi] == '%') ++pi;
  return pi == p.size();
}

bool EvalComparison(const Comparison& cmp, const Row& row) {
  const Literal& value = Lookup(row, cmp.column);
  if (cmp.op == CompareOp::kLike) {
    return LikeMatch(AsText(value), AsText(cmp.rhs));
  }
  if (value.is_num() || cmp.rhs.is_num()) {
    auto a = AsNumber(value);
    auto b = AsNumber(cmp.rhs);
    if (a && b) return Compare(*a, cmp.op, *b);
  }
  return Compare(AsText(value), cmp.op, AsText(cmp.rhs));
}

bool EvalWhere(const Cond& cond, const Row& row) {
  switch (cond.kind()) {
    case Cond::Kind::kLeaf: return EvalComparison(cond.leaf(), row);
    case Cond::Kind::kAnd:
      // Evaluate both sides so a missing column is always reported.
      {
        bool l = EvalWhere(cond.lhs(), row);
        bool r = EvalWhere(cond.rhs(), row);
        return l && r;
      }
    case Cond::Kind::kOr: {
      bool l = EvalWhere(cond.lhs(), row);
      bool r = EvalWhere(cond.rhs(), row);
      return l || r;
    }
  }
  return false;
}

}  // namespace backvis
