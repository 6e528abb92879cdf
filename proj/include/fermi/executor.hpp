#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fermi/error.hpp"
#include "fermi/program.hpp"
#include "fermi/units.hpp"

namespace fermi {

struct ExecOptions {
  UnitMode mode = UnitMode::Lenient;
  // Facts are provenance; by default a citation of an undeclared fact only
  // warns (task inputs carry facts outside the program). When set, it is an
  // UndefinedReference unless the id is in `known_facts`.
  bool require_fact_decls = false;
  FactIdSet known_facts;
  const UnitRegistry* registry = nullptr;  // null: default_registry()
};

struct ExecError {
  ErrorKind kind;
  std::string location;  // offending identifier, or parser line:col
  std::string message;
};

struct ExecutionResult {
  std::variant<Quantity, ExecError> outcome;
  std::vector<std::string> warnings;
  std::vector<std::pair<Identifier, Quantity>> trace;  // completion order
  // Unit of the first reachable value declaration whose dimension matches
  // the answer; empty when none does (the SI rendering is used instead).
  std::string display_unit;

  bool valid() const { return std::holds_alternative<Quantity>(outcome); }
  const Quantity& value() const { return std::get<Quantity>(outcome); }
  const ExecError& error() const { return std::get<ExecError>(outcome); }
};

namespace detail {

class Evaluator {
 public:
  Evaluator(const Program& program, const ExecOptions& options)
      : options_(options),
        registry_(options.registry ? *options.registry : default_registry()) {
    for (const auto& s : program.statements()) {
      if (auto* c = std::get_if<CompExpr>(&s)) comps_.emplace(c->target, c);
      else if (auto* v = std::get_if<ValueDecl>(&s)) values_.emplace(v->id, v);
      else if (auto* f = std::get_if<FactDecl>(&s)) facts_.insert(f->id);
    }
  }

  ExecutionResult run() {
    ExecutionResult result;
    try {
      if (!comps_.contains(Program::root()))
        throw Error(ErrorKind::MissingRoot, "program has no Q0/P computation", Program::root().str());
      Quantity answer = question(Program::root());
      result.outcome = answer;
      report_unreachable();
      result.display_unit = pick_display_unit(answer);
    } catch (const Error& e) {
      result.outcome = ExecError{e.kind(), e.location(), e.what()};
    }
    result.warnings = std::move(warnings_);
    result.trace = std::move(trace_);
    return result;
  }

 private:
  Quantity question(Identifier q) {
    if (auto it = done_.find(q); it != done_.end()) return it->second;
    if (in_progress_.contains(q))
      throw Error(ErrorKind::CyclicDependency, "cyclic dependency through " + q.str(), q.str());
    auto it = comps_.find(q);
    if (it == comps_.end())
      throw Error(ErrorKind::UndefinedReference, q.str() + " is used but never computed", q.str());
    in_progress_.insert(q);
    Quantity result = std::visit([&](const auto& body) { return evaluate(q, body); }, it->second->body);
    in_progress_.erase(q);
    done_.emplace(q, result);
    trace_.emplace_back(q, result);
    return result;
  }

  Quantity evaluate(Identifier q, const MathExpr& m) {
    auto operand = [&](const Operand& arg) {
      if (auto* sub = std::get_if<Identifier>(&arg)) return question(*sub);
      return Quantity(std::get<double>(arg));
    };
    Quantity acc = operand(m.args.front());
    for (std::size_t i = 1; i < m.args.size(); ++i) {
      Quantity rhs = operand(m.args[i]);
      try {
        acc = quantity_arith(m.op, acc, rhs, options_.mode, &warnings_);
      } catch (const Error& e) {
        throw Error(e.kind(), q.str() + ": " + e.what(), q.str());
      }
    }
    return acc;
  }

  Quantity evaluate(Identifier q, const ValueRef& ref) {
    auto it = values_.find(ref.value);
    if (it == values_.end())
      throw Error(ErrorKind::UndefinedReference, q.str() + " cites undeclared value " + ref.value.str(),
                  ref.value.str());
    if (!facts_.contains(ref.because) && !options_.known_facts.contains(ref.because)) {
      if (options_.require_fact_decls)
        throw Error(ErrorKind::UndefinedReference, q.str() + " cites undeclared fact " + ref.because.str(),
                    ref.because.str());
      warnings_.push_back(q.str() + " cites " + ref.because.str() + ", which is not declared in the program");
    }
    used_values_.insert(ref.value);
    const std::string& text = it->second->quantity_text;
    try {
      if (options_.mode == UnitMode::Strict) {
        Quantity v = parse_quantity(text, registry_);
        note_unit(text, v);
        return v;
      }
      QuantityParse parsed = parse_quantity_lenient(text, registry_);
      if (parsed.warning) warnings_.push_back(ref.value.str() + ": " + *parsed.warning);
      else note_unit(text, parsed.quantity);
      return parsed.quantity;
    } catch (const Error& e) {
      throw Error(e.kind(), ref.value.str() + ": " + e.what(), ref.value.str());
    }
  }

  void note_unit(const std::string& text, const Quantity& v) {
    auto unit = std::string(detail::split_number(text).second);
    if (!unit.empty() && !v.dimensionless()) units_seen_.push_back({unit, v.dimension()});
  }

  std::string pick_display_unit(const Quantity& answer) const {
    for (const auto& [unit, dim] : units_seen_)
      if (dim == answer.dimension()) return unit;
    return {};
  }

  void report_unreachable() {
    for (const auto& [id, _] : comps_)
      if (!done_.contains(id)) warnings_.push_back(id.str() + " is never used by the root computation");
    for (const auto& [id, _] : values_)
      if (!used_values_.contains(id)) warnings_.push_back(id.str() + " is declared but never cited");
  }

  const ExecOptions& options_;
  const UnitRegistry& registry_;
  std::map<Identifier, const CompExpr*> comps_;
  std::map<Identifier, const ValueDecl*> values_;
  std::set<Identifier> facts_;
  std::map<Identifier, Quantity> done_;
  std::set<Identifier> in_progress_;
  std::set<Identifier> used_values_;
  std::vector<std::pair<std::string, Dimension>> units_seen_;
  std::vector<std::string> warnings_;
  std::vector<std::pair<Identifier, Quantity>> trace_;
};

}  // namespace detail

// Memoized depth-first evaluation of Q0. Never throws; failures land in
// ExecutionResult::outcome.
inline ExecutionResult execute(const Program& program, const ExecOptions& options = {}) {
  return detail::Evaluator(program, options).run();
}

inline ExecutionResult execute(const Program& program, UnitMode mode) {
  ExecOptions options;
  options.mode = mode;
  return execute(program, options);
}

// Parse + execute; parse failures become an ExecError as well.
inline ExecutionResult execute_text(std::string_view text, const ExecOptions& options = {}) {
  try {
    return execute(parse_program(text), options);
  } catch (const Error& e) {
    ExecutionResult r;
    r.outcome = ExecError{e.kind(), e.location(), e.what()};
    return r;
  }
}

// 1 iff the text parses and executes (lenient units) to a number.
inline int check_validity(std::string_view program_text) {
  return execute_text(program_text).valid() ? 1 : 0;
}

// "65016 L (65.016 m**3)" when a source unit is known, otherwise the SI form.
inline std::string describe_answer(const ExecutionResult& result, const UnitRegistry& registry = default_registry()) {
  if (!result.valid()) {
    const auto& e = result.error();
    return std::string(to_string(e.kind)) + (e.location.empty() ? "" : " at " + e.location) + ": " + e.message;
  }
  const Quantity& q = result.value();
  std::string si = format_significant(q.magnitude());
  if (auto unit = q.dimension().si_unit(); !unit.empty()) si += " " + unit;
  if (result.display_unit.empty() || result.display_unit == q.dimension().si_unit()) return si;
  double in_unit = magnitude_in(q, result.display_unit, registry);
  return format_significant(in_unit) + " " + result.display_unit + " (" + si + ")";
}

}  // namespace fermi
