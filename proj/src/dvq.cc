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

#include "backvis/dvq.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "backvis/text.h"

namespace backvis::dvq {

// ---------------------------------------------------------------------------
// Literals and trees

namespace {

bool ParseNumber(std::string_view s, double* out) {
  if (s.empty()) return false;
  std::string_view body = s;
  if (body.front() == '-' || body.front() == '+') body.remove_prefix(1);
  if (body.empty()) return false;
  if (!(body.front() == '.' || (body.front() >= '0' && body.front() <= '9'))) {
    return false;  // no "inf" or "nan"
  }
  // from_chars rejects a leading '+', so parse the unsigned part.
  double v = 0;
  auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
  if (ec != std::errc() || ptr != body.data() + body.size()) return false;
  *out = s.front() == '-' ? -v : v;
  return true;
}

}  // namespace

Literal Literal::Str(std::string value) {
  return Literal(Kind::kStr, std::move(value), 0.0);
}

Literal Literal::Num(std::string_view written) {
  double v = 0;
  if (!ParseNumber(written, &v)) {
    throw std::invalid_argument("not a number: " + std::string(written));
  }
  return Literal(Kind::kNum, std::string(written), v);
}

Literal Literal::Num(double value) {
  return Literal(Kind::kNum, CanonicalNumber(value), value);
}

bool Literal::ValueEquals(const Literal& other) const {
  if (kind_ != other.kind_) return false;
  return is_num() ? number_ == other.number_ : text_ == other.text_;
}

struct Cond::Node {
  Kind kind;
  std::optional<Comparison> leaf;
  std::optional<Cond> lhs;
  std::optional<Cond> rhs;
};

Cond Cond::Leaf(Comparison cmp) {
  return Cond(std::make_shared<const Node>(
      Node{Kind::kLeaf, std::move(cmp), std::nullopt, std::nullopt}));
}

Cond Cond::And(Cond lhs, Cond rhs) {
  return Cond(std::make_shared<const Node>(
      Node{Kind::kAnd, std::nullopt, std::move(lhs), std::move(rhs)}));
}

Cond Cond::Or(Cond lhs, Cond rhs) {
  return Cond(std::make_shared<const Node>(
      Node{Kind::kOr, std::nullopt, std::move(lhs), std::move(rhs)}));
}

Cond::Kind Cond::kind() const { return node_->kind; }
const Comparison& Cond::leaf() const { return *node_->leaf; }
const Cond& Cond::lhs() const { return *node_->lhs; }
const Cond& Cond::rhs() const { return *node_->rhs; }

bool Cond::operator==(const Cond& other) const {
  if (node_ == other.node_) return true;
  if (kind() != other.kind()) return false;
  if (is_leaf()) return leaf() == other.leaf();
  return lhs() == other.lhs() && rhs() == other.rhs();
}

std::vector<Comparison> CollectLeaves(const Cond& cond) {
  std::vector<Comparison> out;
  std::vector<const Cond*> stack{&cond};
  while (!stack.empty()) {
    const Cond* c = stack.back();
    stack.pop_back();
    if (c->is_leaf()) {
      out.push_back(c->leaf());
    } else {
      stack.push_back(&c->rhs());
      stack.push_back(&c->lhs());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Keyword tables

std::string_view ChartKeyword(ChartType chart) {
  switch (chart) {
    case ChartType::kBar: return "BAR";
    case ChartType::kPie: return "PIE";
    case ChartType::kLine: return "LINE";
    case ChartType::kScatter: return "SCATTER";
    case ChartType::kStackedBar: return "STACKED BAR";
    case ChartType::kGroupedLine: return "GROUPED LINE";
    case ChartType::kGroupedScatter: return "GROUPED SCATTER";
  }
  return "BAR";
}

std::string_view CompareOpText(CompareOp op) {
  switch (op) {
    case CompareOp::kEq: return "=";
    case CompareOp::kNe: return "!=";
    case CompareOp::kLtGt: return "<>";
    case CompareOp::kLt: return "<";
    case CompareOp::kGt: return ">";
    case CompareOp::kLe: return "<=";
    case CompareOp::kGe: return ">=";
    case CompareOp::kLike: return "LIKE";
  }
  return "=";
}

namespace {

std::string_view AggregateText(Aggregate agg) {
  switch (agg) {
    case Aggregate::kCount: return "COUNT";
    case Aggregate::kSum: return "SUM";
    case Aggregate::kAvg: return "AVG";
    case Aggregate::kMin: return "MIN";
    case Aggregate::kMax: return "MAX";
  }
  return "COUNT";
}

std::string_view BinUnitText(BinUnit unit) {
  switch (unit) {
    case BinUnit::kYear: return "YEAR";
    case BinUnit::kMonth: return "MONTH";
    case BinUnit::kDay: return "DAY";
    case BinUnit::kWeekday: return "WEEKDAY";
  }
  return "YEAR";
}

// ---------------------------------------------------------------------------
// Lexer

enum class Tok {
  kIdent,
  kNumber,
  kString,
  kComma,
  kLParen,
  kRParen,
  kStar,
  kOp,
  kSemicolon,
  kEnd,
};

struct Token {
  Tok type;
  std::string text;  // identifier / operator spelling / unquoted string
  std::size_t offset;
};

bool IsIdentStart(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
         static_cast<unsigned char>(c) >= 0x80;
}

bool IsIdentChar(char c) {
  return IsIdentStart(c) || (c >= '0' && c <= '9') || c == '.';
}

bool IsDigit(char c) { return c >= '0' && c <= '9'; }

std::vector<Token> Lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (IsIdentStart(c)) {
      while (i < s.size() && IsIdentChar(s[i])) ++i;
      out.push_back({Tok::kIdent, std::string(s.substr(start, i - start)), start});
      continue;
    }
    bool signed_number = (c == '-' || c == '+') && i + 1 < s.size() &&
                         (IsDigit(s[i + 1]) || s[i + 1] == '.');
    if (IsDigit(c) || signed_number ||
        (c == '.' && i + 1 < s.size() && IsDigit(s[i + 1]))) {
      if (signed_number) ++i;
      while (i < s.size() && IsDigit(s[i])) ++i;
      if (i < s.size() && s[i] == '.') {
        ++i;
        while (i < s.size() && IsDigit(s[i])) ++i;
      }
      if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < s.size() && (s[j] == '-' || s[j] == '+')) ++j;
        if (j < s.size() && IsDigit(s[j])) {
          i = j;
          while (i < s.size() && IsDigit(s[i])) ++i;
        }
      }
      if (i < s.size() && IsIdentStart(s[i])) {
        throw SyntaxError(start, {"number"},
                          std::string(s.substr(start, i - start + 1)));
      }
      out.push_back({Tok::kNumber, std::string(s.substr(start, i - start)), start});
      continue;
    }
    if (c == '"' || c == '\'') {
      std::string value;
      ++i;
      bool closed = false;
      while (i < s.size()) {
        if (s[i] == c) {
          if (i + 1 < s.size() && s[i + 1] == c) {
            value += c;
            i += 2;
            continue;
          }
          ++i;
          closed = true;
          break;
        }
        value += s[i++];
      }
      if (!closed) throw SyntaxError(s.size(), {std::string(1, c)}, "end of input");
      out.push_back({Tok::kString, std::move(value), start});
      continue;
    }
    switch (c) {
      case ',': out.push_back({Tok::kComma, ",", start}); ++i; continue;
      case '(': out.push_back({Tok::kLParen, "(", start}); ++i; continue;
      case ')': out.push_back({Tok::kRParen, ")", start}); ++i; continue;
      case '*': out.push_back({Tok::kStar, "*", start}); ++i; continue;
      case ';': out.push_back({Tok::kSemicolon, ";", start}); ++i; continue;
      case '=': out.push_back({Tok::kOp, "=", start}); ++i; continue;
      default: break;
    }
    if (c == '!' && i + 1 < s.size() && s[i + 1] == '=') {
      out.push_back({Tok::kOp, "!=", start});
      i += 2;
      continue;
    }
    if (c == '<' || c == '>') {
      std::string op(1, c);
      if (i + 1 < s.size() && (s[i + 1] == '=' || (c == '<' && s[i + 1] == '>'))) {
        op += s[i + 1];
      }
      i += op.size();
      out.push_back({Tok::kOp, op, start});
      continue;
    }
    throw SyntaxError(start, {"token"}, std::string(1, c));
  }
  out.push_back({Tok::kEnd, "", s.size()});
  return out;
}

// ---------------------------------------------------------------------------
// Parser

const std::set<std::string>& UnsupportedKeywords() {
  static const std::set<std::string> kWords = {
      "HAVING", "LIMIT",  "UNION",    "INTERSECT", "EXCEPT", "BETWEEN",
      "IN",     "NOT",    "IS",       "DISTINCT",  "EXISTS", "OFFSET",
      "CASE",   "LEFT",   "RIGHT",    "INNER",     "OUTER",  "CROSS",
      "NATURAL"};
  return kWords;
}

std::optional<Aggregate> AggregateFromWord(std::string_view w) {
  if (EqualsIgnoreCase(w, "COUNT")) return Aggregate::kCount;
  if (EqualsIgnoreCase(w, "SUM")) return Aggregate::kSum;
  if (EqualsIgnoreCase(w, "AVG")) return Aggregate::kAvg;
  if (EqualsIgnoreCase(w, "MIN")) return Aggregate::kMin;
  if (EqualsIgnoreCase(w, "MAX")) return Aggregate::kMax;
  return std::nullopt;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : tokens_(Lex(text)) {}

  Cond ParseStandaloneCond() {
    Cond c = ParseOr();
    if (Peek().type != Tok::kEnd) Fail({"AND", "OR", "end of input"});
    return c;
  }

  DVQuery Parse() {
    DVQuery q;
    ExpectKeyword("VISUALIZE");
    q.chart = ParseChart();
    ExpectKeyword("SELECT");
    q.select.push_back(ParseSelectExpr());
    while (Peek().type == Tok::kComma) {
      Advance();
      q.select.push_back(ParseSelectExpr());
    }
    ExpectKeyword("FROM");
    q.from = ParseTableRef();
    while (PeekKeyword("JOIN")) {
      Advance();
      Join j;
      j.table = ParseTableRef();
      ExpectKeyword("ON");
      j.left_column = ExpectIdent();
      ExpectOp("=");
      j.right_column = ExpectIdent();
      q.joins.push_back(std::move(j));
    }
    if (PeekKeyword("WHERE")) {
      Advance();
      q.where = ParseOr();
    }
    bool seen_group = false, seen_order = false, seen_bin = false;
    for (;;) {
      const Token& t = Peek();
      if (PeekKeyword("GROUP") && !seen_group) {
        Advance();
        ExpectKeyword("BY");
        q.group_by.push_back(ExpectIdent());
        while (Peek().type == Tok::kComma) {
          Advance();
          q.group_by.push_back(ExpectIdent());
        }
        seen_group = true;
      } else if (PeekKeyword("ORDER") && !seen_order) {
        Advance();
        ExpectKeyword("BY");
        OrderBy ob;
        ob.expr = ParseSelectExpr();
        if (PeekKeyword("ASC")) {
          Advance();
          ob.direction = SortDirection::kAsc;
        } else if (PeekKeyword("DESC")) {
          Advance();
          ob.direction = SortDirection::kDesc;
        }
        q.order_by = std::move(ob);
        seen_order = true;
      } else if (PeekKeyword("BIN") && !seen_bin) {
        Advance();
        Bin b;
        b.column = ExpectIdent();
        ExpectKeyword("BY");
        b.unit = ParseBinUnit();
        q.bin = std::move(b);
        seen_bin = true;
      } else if (t.type == Tok::kSemicolon) {
        Advance();
        if (Peek().type != Tok::kEnd) Fail({"end of input"});
        break;
      } else if (t.type == Tok::kEnd) {
        break;
      } else {
        CheckUnsupported(t);
        std::set<std::string> expected{"end of input"};
        if (!seen_group) expected.insert("GROUP");
        if (!seen_order) expected.insert("ORDER");
        if (!seen_bin) expected.insert("BIN");
        Fail(std::move(expected));
      }
    }
    CheckAxes(q);
    return q;
  }

 private:
  const Token& Peek(std::size_t ahead = 0) const {
    std::size_t i = std::min(pos_ + ahead, tokens_.size() - 1);
    return tokens_[i];
  }
  void Advance() {
    if (pos_ + 1 < tokens_.size()) ++pos_;
  }

  bool PeekKeyword(std::string_view kw, std::size_t ahead = 0) const {
    const Token& t = Peek(ahead);
    return t.type == Tok::kIdent && EqualsIgnoreCase(t.text, kw);
  }

  [[noreturn]] void Fail(std::set<std::string> expected) const {
    const Token& t = Peek();
    std::string found = t.type == Tok::kEnd ? "end of input" : t.text;
    if (t.type == Tok::kString) found = "string literal";
    throw SyntaxError(t.offset, std::move(expected), std::move(found));
  }

  void CheckUnsupported(const Token& t, bool select_is_subquery = true) const {
    if (t.type != Tok::kIdent) return;
    std::string upper = AsciiUpper(t.text);
    if (UnsupportedKeywords().count(upper)) {
      throw UnsupportedConstruct(t.offset, upper);
    }
    if (select_is_subquery && upper == "SELECT") throw UnsupportedConstruct(t.offset, "subquery");
  }

  void ExpectKeyword(std::string_view kw) {
    if (!PeekKeyword(kw)) {
      CheckUnsupported(Peek(), /*select_is_subquery=*/false);
      Fail({std::string(kw)});
    }
    Advance();
  }

  void ExpectOp(std::string_view op) {
    if (Peek().type != Tok::kOp || Peek().text != op) Fail({std::string(op)});
    Advance();
  }

  std::string ExpectIdent() {
    const Token& t = Peek();
    if (t.type != Tok::kIdent) {
      if (t.type == Tok::kLParen) throw UnsupportedConstruct(t.offset, "expression");
      Fail({"identifier"});
    }
    CheckUnsupported(t);
    std::string out = t.text;
    Advance();
    return out;
  }

  ChartType ParseChart() {
    static const std::set<std::string> kExpected = {
        "BAR", "PIE", "LINE", "SCATTER", "STACKED", "GROUPED", "GROUPING"};
    if (PeekKeyword("BAR")) { Advance(); return ChartType::kBar; }
    if (PeekKeyword("PIE")) { Advance(); return ChartType::kPie; }
    if (PeekKeyword("LINE")) { Advance(); return ChartType::kLine; }
    if (PeekKeyword("SCATTER")) { Advance(); return ChartType::kScatter; }
    if (PeekKeyword("STACKED")) {
      Advance();
      ExpectKeyword("BAR");
      return ChartType::kStackedBar;
    }
    if (PeekKeyword("GROUPED") || PeekKeyword("GROUPING")) {
      Advance();
      if (PeekKeyword("LINE")) { Advance(); return ChartType::kGroupedLine; }
      if (PeekKeyword("SCATTER")) { Advance(); return ChartType::kGroupedScatter; }
      Fail({"LINE", "SCATTER"});
    }
    Fail(kExpected);
  }

  SelectExpr ParseSelectExpr() {
    const Token& t = Peek();
    if (t.type == Tok::kStar) throw UnsupportedConstruct(t.offset, "bare *");
    if (t.type != Tok::kIdent) Fail({"identifier", "aggregate"});
    if (auto agg = AggregateFromWord(t.text);
        agg && Peek(1).type == Tok::kLParen) {
      Advance();
      Advance();
      SelectExpr e;
      e.aggregate = agg;
      if (Peek().type == Tok::kStar) {
        e.column = "*";
        Advance();
      } else {
        e.column = ExpectIdent();
      }
      if (Peek().type != Tok::kRParen) Fail({")"});
      Advance();
      return e;
    }
    CheckUnsupported(t);
    if (Peek(1).type == Tok::kLParen) {
      throw UnsupportedConstruct(t.offset, "function " + AsciiUpper(t.text));
    }
    SelectExpr e;
    e.column = ExpectIdent();
    return e;
  }

  TableRef ParseTableRef() {
    if (Peek().type == Tok::kLParen) {
      throw UnsupportedConstruct(Peek().offset, "subquery");
    }
    TableRef ref;
    ref.name = ExpectIdent();
    if (PeekKeyword("AS")) {
      Advance();
      ref.alias = ExpectIdent();
    }
    return ref;
  }

  BinUnit ParseBinUnit() {
    if (PeekKeyword("YEAR")) { Advance(); return BinUnit::kYear; }
    if (PeekKeyword("MONTH")) { Advance(); return BinUnit::kMonth; }
    if (PeekKeyword("DAY")) { Advance(); return BinUnit::kDay; }
    if (PeekKeyword("WEEKDAY")) { Advance(); return BinUnit::kWeekday; }
    Fail({"YEAR", "MONTH", "DAY", "WEEKDAY"});
  }

  Cond ParseOr() {
    Cond c = ParseAnd();
    while (PeekKeyword("OR")) {
      Advance();
      c = Cond::Or(std::move(c), ParseAnd());
    }
    return c;
  }

  Cond ParseAnd() {
    Cond c = ParseAtom();
    while (PeekKeyword("AND")) {
      Advance();
      c = Cond::And(std::move(c), ParseAtom());
    }
    return c;
  }

  Cond ParseAtom() {
    if (Peek().type == Tok::kLParen) {
      if (PeekKeyword("SELECT", 1)) {
        throw UnsupportedConstruct(Peek(1).offset, "subquery");
      }
      Advance();
      Cond c = ParseOr();
      if (Peek().type != Tok::kRParen) Fail({")", "AND", "OR"});
      Advance();
      return c;
    }
    Comparison cmp;
    cmp.column = ExpectIdent();
    const Token& op = Peek();
    if (op.type == Tok::kOp) {
      if (op.text == "=") cmp.op = CompareOp::kEq;
      else if (op.text == "!=") cmp.op = CompareOp::kNe;
      else if (op.text == "<>") cmp.op = CompareOp::kLtGt;
      else if (op.text == "<") cmp.op = CompareOp::kLt;
      else if (op.text == ">") cmp.op = CompareOp::kGt;
      else if (op.text == "<=") cmp.op = CompareOp::kLe;
      else cmp.op = CompareOp::kGe;
      Advance();
    } else if (PeekKeyword("LIKE")) {
      cmp.op = CompareOp::kLike;
      Advance();
    } else {
      CheckUnsupported(op);
      Fail({"=", "!=", "<>", "<", ">", "<=", ">=", "LIKE"});
    }
    const Token& rhs = Peek();
    if (rhs.type == Tok::kString) {
      cmp.rhs = Literal::Str(rhs.text);
    } else if (rhs.type == Tok::kNumber && cmp.op != CompareOp::kLike) {
      try {
        cmp.rhs = Literal::Num(rhs.text);
      } catch (const std::invalid_argument&) {
        throw SyntaxError(rhs.offset, {"finite number"}, rhs.text);
      }
    } else if (rhs.type == Tok::kIdent && cmp.op != CompareOp::kLike) {
      CheckUnsupported(rhs);
      throw UnsupportedConstruct(rhs.offset, "column comparison");
    } else if (rhs.type == Tok::kLParen) {
      throw UnsupportedConstruct(rhs.offset, "subquery");
    } else {
      if (cmp.op == CompareOp::kLike) Fail({"string literal"});
      Fail({"string literal", "number"});
    }
    Advance();
    return Cond::Leaf(std::move(cmp));
  }

  void CheckAxes(const DVQuery& q) const {
    if (q.select.size() >= 2) return;
    if (q.select.size() == 1 && q.select[0].aggregate && q.bin) return;
    throw UnsupportedConstruct(0, "single-axis SELECT");
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

std::string JoinSet(const std::set<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

// Parenthesize `child` when printing it bare under `parent` would parse
// back into a different tree.
bool NeedsParens(Cond::Kind parent, const Cond& child, bool is_rhs) {
  if (child.is_leaf()) return false;
  if (parent == Cond::Kind::kAnd && child.kind() == Cond::Kind::kOr) return true;
  return is_rhs && child.kind() == parent;
}

void AppendCond(const Cond& c, std::string& out) {
  if (c.is_leaf()) {
    out += SerializeComparison(c.leaf());
    return;
  }
  auto side = [&](const Cond& child, bool is_rhs) {
    if (NeedsParens(c.kind(), child, is_rhs)) {
      out += "( ";
      AppendCond(child, out);
      out += " )";
    } else {
      AppendCond(child, out);
    }
  };
  side(c.lhs(), false);
  out += c.kind() == Cond::Kind::kAnd ? " AND " : " OR ";
  side(c.rhs(), true);
}

std::string TableRefText(const TableRef& t) {
  return t.alias ? t.name + " AS " + *t.alias : t.name;
}

std::string Fold(const std::string& s) { return AsciiLower(s); }

TableRef NormalizeTable(const TableRef& t) {
  TableRef out{Fold(t.name), std::nullopt};
  if (t.alias) out.alias = Fold(*t.alias);
  return out;
}

SelectExpr NormalizeSelect(const SelectExpr& e) {
  return SelectExpr{e.aggregate, Fold(e.column)};
}

}  // namespace

SyntaxError::SyntaxError(std::size_t offset, std::set<std::string> expected,
                         std::string found)
    : Error("syntax error at offset " + std::to_string(offset) +
            ": expected " + JoinSet(expected) + ", found '" + found + "'"),
      offset_(offset),
      expected_(std::move(expected)),
      found_(std::move(found)) {}

UnsupportedConstruct::UnsupportedConstruct(std::size_t offset,
                                           std::string construct)
    : Error("unsupported construct at offset " + std::to_string(offset) +
            ": " + construct),
      offset_(offset),
      construct_(std::move(construct)) {}

DVQuery ParseDvq(std::string_view text) {
  if (Trim(text).empty()) throw SyntaxError(0, {"VISUALIZE"}, "end of input");
  return Parser(text).Parse();
}

Cond ParseCond(std::string_view text) {
  if (Trim(text).empty()) throw SyntaxError(0, {"identifier"}, "end of input");
  return Parser(text).ParseStandaloneCond();
}

std::optional<ChartType> ChartFromKeyword(std::string_view keyword) {
  std::string k = AsciiUpper(Trim(keyword));
  for (char& c : k) {
    if (c == '_') c = ' ';
  }
  if (k.rfind("GROUPING ", 0) == 0) k = "GROUPED " + k.substr(9);
  for (ChartType c : {ChartType::kBar, ChartType::kPie, ChartType::kLine,
                      ChartType::kScatter, ChartType::kStackedBar,
                      ChartType::kGroupedLine, ChartType::kGroupedScatter}) {
    if (ChartKeyword(c) == k) return c;
  }
  return std::nullopt;
}

std::string SerializeLiteral(const Literal& lit) {
  if (lit.is_num()) return lit.text();
  std::string out = "\"";
  for (char c : lit.text()) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string SerializeComparison(const Comparison& cmp) {
  std::string out = cmp.column;
  out += ' ';
  out += CompareOpText(cmp.op);
  out += ' ';
  out += SerializeLiteral(cmp.rhs);
  return out;
}

std::string SerializeCond(const Cond& cond) {
  std::string out;
  AppendCond(cond, out);
  return out;
}

std::string SerializeSelectExpr(const SelectExpr& e) {
  if (!e.aggregate) return e.column;
  std::string out(AggregateText(*e.aggregate));
  out += '(';
  out += e.column;
  out += ')';
  return out;
}

std::string SerializeDvq(const DVQuery& q) {
  std::string out = "VISUALIZE ";
  out += ChartKeyword(q.chart);
  out += " SELECT ";
  for (std::size_t i = 0; i < q.select.size(); ++i) {
    if (i > 0) out += " , ";
    out += SerializeSelectExpr(q.select[i]);
  }
  out += " FROM " + TableRefText(q.from);
  for (const Join& j : q.joins) {
    out += " JOIN " + TableRefText(j.table) + " ON " + j.left_column + " = " +
           j.right_column;
  }
  if (q.where) out += " WHERE " + SerializeCond(*q.where);
  if (!q.group_by.empty()) {
    out += " GROUP BY ";
    for (std::size_t i = 0; i < q.group_by.size(); ++i) {
      if (i > 0) out += " , ";
      out += q.group_by[i];
    }
  }
  if (q.order_by) {
    out += " ORDER BY " + SerializeSelectExpr(q.order_by->expr);
    if (q.order_by->direction) {
      out += *q.order_by->direction == SortDirection::kAsc ? " ASC" : " DESC";
    }
  }
  if (q.bin) {
    out += " BIN " + q.bin->column + " BY ";
    out += BinUnitText(q.bin->unit);
  }
  return out;
}

std::string CanonicalNumber(double value) {
  if (value == 0) return "0";
  if (std::trunc(value) == value && std::fabs(value) < 0x1.0p53) {
    return std::to_string(static_cast<long long>(value));
  }
  return FormatDouble(value);
}

Comparison NormalizeComparison(const Comparison& cmp) {
  Comparison out;
  out.column = Fold(cmp.column);
  out.op = cmp.op == CompareOp::kLtGt ? CompareOp::kNe : cmp.op;
  out.rhs = cmp.rhs.is_num() ? Literal::Num(cmp.rhs.number()) : cmp.rhs;
  return out;
}

Cond NormalizeCond(const Cond& c) {
  if (c.is_leaf()) return Cond::Leaf(NormalizeComparison(c.leaf()));
  Cond l = NormalizeCond(c.lhs());
  Cond r = NormalizeCond(c.rhs());
  return c.kind() == Cond::Kind::kAnd ? Cond::And(std::move(l), std::move(r))
                                      : Cond::Or(std::move(l), std::move(r));
}

DVQuery NormalizeDvq(const DVQuery& q) {
  DVQuery out;
  out.chart = q.chart;
  for (const auto& e : q.select) out.select.push_back(NormalizeSelect(e));
  out.from = NormalizeTable(q.from);
  for (const Join& j : q.joins) {
    out.joins.push_back(
        Join{NormalizeTable(j.table), Fold(j.left_column), Fold(j.right_column)});
  }
  if (q.where) out.where = NormalizeCond(*q.where);
  for (const auto& g : q.group_by) out.group_by.push_back(Fold(g));
  if (q.order_by) {
    out.order_by = OrderBy{NormalizeSelect(q.order_by->expr),
                           q.order_by->direction.value_or(SortDirection::kAsc)};
  }
  if (q.bin) out.bin = Bin{Fold(q.bin->column), q.bin->unit};
  return out;
}

}  // namespace backvis::dvq
