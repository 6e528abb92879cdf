#pragma once

// Explanation programs: AST, parser and canonical printer.
//
//   program    := statement ( (newline | ",") statement )*
//   statement  := qn-id "->" (math-expr | value-ref)
//               | "P" (":" | "->") (math-expr | value-ref)      root alias for Q0
//               | qn-id ":" text | fact-id ":" text | val-id ":" number [units]
//   math-expr  := ("Add" | "Sub" | "Mul" | "Div") "(" arg ("," arg)* ")"
//   arg        := qn-id | number
//   value-ref  := val-id ("because" | "|") fact-id
//
// Declaration text runs to the end of the line, or to a comma that is
// followed by the head of another statement (so "A1: 5, F1: x." splits in two
// while "F1: At any given time, 1270000 people ..." stays whole).

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fermi/error.hpp"
#include "fermi/units.hpp"

namespace fermi {

enum class IdKind : std::uint8_t { Question, Fact, Value };

struct Identifier {
  IdKind kind = IdKind::Question;
  std::uint32_t index = 0;

  static Identifier question(std::uint32_t i) { return {IdKind::Question, i}; }
  static Identifier fact(std::uint32_t i) { return {IdKind::Fact, i}; }
  static Identifier value(std::uint32_t i) { return {IdKind::Value, i}; }

  std::string str() const {
    char prefix = kind == IdKind::Question ? 'Q' : kind == IdKind::Fact ? 'F' : 'A';
    return prefix + std::to_string(index);
  }

  // Accepts "Q3", "F1", "A12"; also "P" as an alias of Q0.
  static std::optional<Identifier> parse(std::string_view text) {
    if (text == "P") return question(0);
    if (text.size() < 2) return std::nullopt;
    IdKind kind;
    switch (text.front()) {
      case 'Q': kind = IdKind::Question; break;
      case 'F': kind = IdKind::Fact; break;
      case 'A': kind = IdKind::Value; break;
      default: return std::nullopt;
    }
    std::uint32_t index = 0;
    auto digits = text.substr(1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
    return Identifier{kind, index};
  }

  friend bool operator==(const Identifier&, const Identifier&) = default;
  friend auto operator<=>(const Identifier&, const Identifier&) = default;
};

using FactIdSet = std::set<Identifier>;

// A math-expr argument: a sub-question or a dimensionless literal.
using Operand = std::variant<Identifier, double>;

struct MathExpr {
  ArithOp op = ArithOp::Mul;
  std::vector<Operand> args;
  friend bool operator==(const MathExpr&, const MathExpr&) = default;
};

struct ValueRef {
  Identifier value;
  Identifier because;
  friend bool operator==(const ValueRef&, const ValueRef&) = default;
};

struct CompExpr {
  Identifier target;
  std::variant<MathExpr, ValueRef> body;
  friend bool operator==(const CompExpr&, const CompExpr&) = default;
};

struct QuestionDecl {
  Identifier id;
  std::string text;
  friend bool operator==(const QuestionDecl&, const QuestionDecl&) = default;
};

struct FactDecl {
  Identifier id;
  std::string text;
  friend bool operator==(const FactDecl&, const FactDecl&) = default;
};

struct ValueDecl {
  Identifier id;
  std::string quantity_text;
  friend bool operator==(const ValueDecl&, const ValueDecl&) = default;
};

using Statement = std::variant<CompExpr, QuestionDecl, FactDecl, ValueDecl>;

inline Identifier statement_id(const Statement& s) {
  return std::visit(
      [](const auto& st) {
        if constexpr (std::is_same_v<std::decay_t<decltype(st)>, CompExpr>)
          return st.target;
        else
          return st.id;
      },
      s);
}

// Ordering key used for canonical comparisons: (statement kind, identifier).
inline std::pair<std::size_t, Identifier> statement_key(const Statement& s) {
  return {s.index(), statement_id(s)};
}

class Program {
 public:
  Program() = default;
  explicit Program(std::vector<Statement> statements) : statements_(std::move(statements)) {}

  const std::vector<Statement>& statements() const { return statements_; }
  static Identifier root() { return Identifier::question(0); }

  const CompExpr* computation(Identifier q) const {
    for (const auto& s : statements_)
      if (auto* c = std::get_if<CompExpr>(&s); c && c->target == q) return c;
    return nullptr;
  }
  const ValueDecl* value(Identifier a) const {
    for (const auto& s : statements_)
      if (auto* v = std::get_if<ValueDecl>(&s); v && v->id == a) return v;
    return nullptr;
  }
  const FactDecl* fact(Identifier f) const {
    for (const auto& s : statements_)
      if (auto* v = std::get_if<FactDecl>(&s); v && v->id == f) return v;
    return nullptr;
  }
  const QuestionDecl* question(Identifier q) const {
    for (const auto& s : statements_)
      if (auto* v = std::get_if<QuestionDecl>(&s); v && v->id == q) return v;
    return nullptr;
  }

  // Statement order is presentation only.
  friend bool operator==(const Program& a, const Program& b) { return a.sorted() == b.sorted(); }

 private:
  std::vector<Statement> sorted() const {
    auto out = statements_;
    std::stable_sort(out.begin(), out.end(),
                     [](const Statement& x, const Statement& y) { return statement_key(x) < statement_key(y); });
    return out;
  }

  std::vector<Statement> statements_;
};

// ---------------------------------------------------------------------------
// Parser

namespace detail {

class ProgramParser {
 public:
  explicit ProgramParser(std::string_view text) : text_(text) {}

  Program parse() {
    std::vector<Statement> statements;
    std::map<std::pair<std::size_t, Identifier>, std::size_t> seen;
    skip_separators();
    if (at_end()) fail("empty program");
    while (!at_end()) {
      auto [line, col] = position();
      Statement st = statement();
      auto key = statement_key(st);
      if (auto it = seen.find(key); it != seen.end()) {
        if (!(statements[it->second] == st)) {
          throw Error(ErrorKind::DuplicateDefinition,
                      std::to_string(line) + ":" + std::to_string(col) + ": conflicting definitions of " +
                          statement_id(st).str(),
                      statement_id(st).str());
        }
      } else {
        seen.emplace(key, statements.size());
        statements.push_back(std::move(st));
      }
      end_of_statement();
      skip_separators();
    }
    return Program(std::move(statements));
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek(std::size_t ahead = 0) const { return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0'; }

  std::pair<int, int> position(std::size_t at) const {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < at && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    return {line, col};
  }
  std::pair<int, int> position() const { return position(pos_); }

  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    auto [line, col] = position(at);
    std::string loc = std::to_string(line) + ":" + std::to_string(col);
    std::string near;
    if (at < text_.size()) {
      auto end = text_.find_first_of(" \t\r\n,()", at);
      near = std::string(text_.substr(at, end == std::string_view::npos ? std::string_view::npos : std::max<std::size_t>(end - at, 1)));
    }
    throw Error(ErrorKind::SyntaxError,
                loc + ": " + what + (near.empty() ? std::string(" at end of input") : " near '" + near + "'"), loc);
  }
  [[noreturn]] void fail(const std::string& what) const { fail(what, pos_); }

  void skip_blanks() {
    while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos_;
  }
  void skip_ws() {
    while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\r' || peek() == '\n')) ++pos_;
  }
  void skip_separators() {
    while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\r' || peek() == '\n' || peek() == ','))
      ++pos_;
  }

  static bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
  }

  std::string_view word() {
    std::size_t start = pos_;
    while (!at_end() && is_word_char(peek())) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  Identifier identifier(std::optional<IdKind> expected, const char* what) {
    std::size_t start = pos_;
    auto w = word();
    auto id = Identifier::parse(w);
    if (!id || (expected && id->kind != *expected)) fail(std::string("expected ") + what, start);
    return *id;
  }

  // True when the text at `at` looks like `ID ->` or `ID :`.
  bool statement_head_at(std::size_t at) const {
    std::size_t i = at;
    while (i < text_.size() && (text_[i] == ' ' || text_[i] == '\t' || text_[i] == '\r' || text_[i] == '\n')) ++i;
    std::size_t start = i;
    while (i < text_.size() && is_word_char(text_[i])) ++i;
    if (!Identifier::parse(text_.substr(start, i - start))) return false;
    while (i < text_.size() && (text_[i] == ' ' || text_[i] == '\t')) ++i;
    if (i < text_.size() && text_[i] == ':') return true;
    return text_.substr(i, 2) == "->";
  }

  Statement statement() {
    std::size_t start = pos_;
    auto head_text = word();
    auto head = Identifier::parse(head_text);
    if (!head) fail("expected a statement identifier (Q#, F#, A# or P)", start);
    bool alias = head_text == "P";
    skip_blanks();
    if (text_.substr(pos_, 2) == "->") {
      pos_ += 2;
      if (head->kind != IdKind::Question) fail("only questions can be computed with '->'", start);
      return computation(*head);
    }
    if (peek() != ':') fail("expected '->' or ':'");
    ++pos_;
    if (alias) return computation(*head);
    skip_blanks();
    std::size_t text_start = pos_;
    std::string body = declaration_text();
    switch (head->kind) {
      case IdKind::Question: return QuestionDecl{*head, std::move(body)};
      case IdKind::Fact: return FactDecl{*head, std::move(body)};
      case IdKind::Value:
        if (body.empty()) fail("value declaration needs a number", text_start);
        return ValueDecl{*head, std::move(body)};
    }
    fail("unreachable");
  }

  std::string declaration_text() {
    std::size_t start = pos_;
    while (!at_end() && peek() != '\n') {
      if (peek() == ',' && statement_head_at(pos_ + 1)) break;
      ++pos_;
    }
    return std::string(trim(text_.substr(start, pos_ - start)));
  }

  CompExpr computation(Identifier target) {
    skip_blanks();
    std::size_t start = pos_;
    auto w = word();
    if (w.empty()) fail("expected an operator or a value identifier");
    if (auto id = Identifier::parse(w); id && id->kind == IdKind::Value) {
      skip_blanks();
      if (peek() == '|') {
        ++pos_;
      } else {
        std::size_t kw = pos_;
        if (word() != "because") fail("expected 'because' or '|'", kw);
      }
      skip_blanks();
      Identifier fact = identifier(IdKind::Fact, "a fact identifier (F#)");
      return CompExpr{target, ValueRef{*id, fact}};
    }
    ArithOp op;
    if (w == "Add") op = ArithOp::Add;
    else if (w == "Sub") op = ArithOp::Sub;
    else if (w == "Mul") op = ArithOp::Mul;
    else if (w == "Div") op = ArithOp::Div;
    else fail("unknown operator '" + std::string(w) + "'", start);

    skip_blanks();
    if (peek() != '(') fail("expected '('");
    ++pos_;
    MathExpr expr{op, {}};
    skip_ws();
    while (true) {
      expr.args.push_back(operand());
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        skip_ws();
        continue;
      }
      if (peek() == ')') {
        ++pos_;
        break;
      }
      fail("expected ',' or ')'");
    }
    bool binary = op == ArithOp::Sub || op == ArithOp::Div;
    if (binary && expr.args.size() != 2) fail(std::string(to_string(op)) + " takes exactly 2 arguments", start);
    if (!binary && expr.args.size() < 2) fail(std::string(to_string(op)) + " takes at least 2 arguments", start);
    return CompExpr{target, std::move(expr)};
  }

  Operand operand() {
    std::size_t start = pos_;
    char c = peek();
    if ((c >= '0' && c <= '9') || c == '.' || c == '-' || c == '+') {
      std::size_t end = pos_;
      while (end < text_.size() && text_[end] != ',' && text_[end] != ')' && text_[end] != ' ' &&
             text_[end] != '\t' && text_[end] != '\n' && text_[end] != '\r')
        ++end;
      std::string_view lit = text_.substr(pos_, end - pos_);
      if (!lit.empty() && lit.front() == '+') lit.remove_prefix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(lit.data(), lit.data() + lit.size(), v);
      if (ec != std::errc{} || ptr != lit.data() + lit.size() || !std::isfinite(v)) fail("bad numeric literal", start);
      pos_ = end;
      return v;
    }
    return identifier(IdKind::Question, "a question identifier (Q#) or a number");
  }

  void end_of_statement() {
    skip_blanks();
    if (at_end() || peek() == '\n' || peek() == ',') return;
    fail("unexpected text after statement");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Program parse_program(std::string_view text) { return detail::ProgramParser(text).parse(); }

// ---------------------------------------------------------------------------
// Printer

inline std::string render_statement(const Statement& s) {
  struct Visitor {
    std::string operator()(const QuestionDecl& d) const { return d.id.str() + ": " + d.text; }
    std::string operator()(const FactDecl& d) const { return d.id.str() + ": " + d.text; }
    std::string operator()(const ValueDecl& d) const { return d.id.str() + ": " + d.quantity_text; }
    std::string operator()(const CompExpr& c) const {
      std::string out = c.target.str() + " -> ";
      if (auto* ref = std::get_if<ValueRef>(&c.body)) return out + ref->value.str() + " because " + ref->because.str();
      const auto& m = std::get<MathExpr>(c.body);
      out += std::string(to_string(m.op)) + "(";
      for (std::size_t i = 0; i < m.args.size(); ++i) {
        if (i) out += ", ";
        if (auto* q = std::get_if<Identifier>(&m.args[i]))
          out += q->str();
        else
          out += format_exact(std::get<double>(m.args[i]));
      }
      return out + ")";
    }
  };
  return std::visit(Visitor{}, s);
}

// Canonical text: question, value and fact declarations (each by index), then
// computations with every sub-question emitted before the computation that
// uses it; unreachable computations trail in index order.
inline std::string render_program(const Program& p) {
  std::vector<const Statement*> questions, values, facts;
  std::map<Identifier, const CompExpr*> comps;
  for (const auto& s : p.statements()) {
    if (std::holds_alternative<QuestionDecl>(s)) questions.push_back(&s);
    else if (std::holds_alternative<ValueDecl>(s)) values.push_back(&s);
    else if (std::holds_alternative<FactDecl>(s)) facts.push_back(&s);
    else comps.emplace(std::get<CompExpr>(s).target, &std::get<CompExpr>(s));
  }
  auto by_id = [](const Statement* a, const Statement* b) { return statement_id(*a) < statement_id(*b); };
  std::sort(questions.begin(), questions.end(), by_id);
  std::sort(values.begin(), values.end(), by_id);
  std::sort(facts.begin(), facts.end(), by_id);

  std::string out;
  auto line = [&out](const std::string& l) {
    out += l;
    out += '\n';
  };
  for (auto* s : questions) line(render_statement(*s));
  for (auto* s : values) line(render_statement(*s));
  for (auto* s : facts) line(render_statement(*s));

  std::set<Identifier> emitted;
  std::function<void(Identifier)> emit = [&](Identifier q) {
    auto it = comps.find(q);
    if (it == comps.end() || !emitted.insert(q).second) return;
    if (auto* m = std::get_if<MathExpr>(&it->second->body)) {
      for (const auto& arg : m->args)
        if (auto* sub = std::get_if<Identifier>(&arg)) emit(*sub);
    }
    line(render_statement(Statement{*it->second}));
  };
  emit(Program::root());
  for (const auto& [id, _] : comps) emit(id);
  if (!out.empty()) out.pop_back();
  return out;
}

// Fact ids cited by "because" clauses; declarations alone don't count.
inline FactIdSet used_fact_ids(const Program& p) {
  FactIdSet out;
  for (const auto& s : p.statements())
    if (auto* c = std::get_if<CompExpr>(&s))
      if (auto* ref = std::get_if<ValueRef>(&c->body)) out.insert(ref->because);
  return out;
}

// Rewrites fact identifiers (in citations and declarations) through `mapping`;
// ids missing from the mapping are left untouched.
inline Program remap_fact_ids(const Program& p, const std::map<Identifier, Identifier>& mapping) {
  auto map_id = [&](Identifier id) {
    auto it = mapping.find(id);
    return it == mapping.end() ? id : it->second;
  };
  std::vector<Statement> out;
  out.reserve(p.statements().size());
  for (auto s : p.statements()) {
    if (auto* c = std::get_if<CompExpr>(&s)) {
      if (auto* ref = std::get_if<ValueRef>(&c->body)) ref->because = map_id(ref->because);
    } else if (auto* f = std::get_if<FactDecl>(&s)) {
      f->id = map_id(f->id);
    }
    out.push_back(std::move(s));
  }
  return Program(std::move(out));
}

// Nesting depth of computations below `from` (a lone value-ref is 1).
inline int program_depth(const Program& p, Identifier from = Program::root()) {
  std::map<Identifier, int> memo;
  std::set<Identifier> active;
  std::function<int(Identifier)> depth = [&](Identifier q) -> int {
    if (auto it = memo.find(q); it != memo.end()) return it->second;
    const CompExpr* c = p.computation(q);
    if (c == nullptr || !active.insert(q).second) return 0;
    int d = 1;
    if (auto* m = std::get_if<MathExpr>(&c->body))
      for (const auto& arg : m->args)
        if (auto* sub = std::get_if<Identifier>(&arg)) d = std::max(d, 1 + depth(*sub));
    active.erase(q);
    memo[q] = d;
    return d;
  };
  return depth(from);
}

}  // namespace fermi
