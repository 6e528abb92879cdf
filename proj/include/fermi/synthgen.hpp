#pragma once

// Synthetic Fermi problems from templates over the knowledge base.
//
// Each template pairs a question with slots ($x, $y, $k) and a formula over
// slot attributes. Instantiation binds objects to slots and emits a program
// with one sub-question, one value and one fact per attribute reference, and
// one computation per formula node. Decomposition rewrites one attribute
// value o.a as ratio(o.a / z.a) * z.a for a pivot object z.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fermi/error.hpp"
#include "fermi/executor.hpp"
#include "fermi/kb.hpp"
#include "fermi/parallel.hpp"
#include "fermi/program.hpp"
#include "fermi/random.hpp"
#include "fermi/record.hpp"
#include "fermi/units.hpp"

namespace fermi {

struct FormulaNode {
  enum class Kind { Attr, K, Literal, Op };
  Kind kind = Kind::Literal;
  int slot = 0;  // 0 = $x, 1 = $y
  Attribute attr = Attribute::Length;
  double literal = 0.0;
  ArithOp op = ArithOp::Mul;
  std::vector<FormulaNode> children;

  static FormulaNode attribute(int slot, Attribute a) {
    FormulaNode n;
    n.kind = Kind::Attr;
    n.slot = slot;
    n.attr = a;
    return n;
  }
  static FormulaNode k() {
    FormulaNode n;
    n.kind = Kind::K;
    return n;
  }
  static FormulaNode number(double v) {
    FormulaNode n;
    n.kind = Kind::Literal;
    n.literal = v;
    return n;
  }
  static FormulaNode apply(ArithOp op, FormulaNode a, FormulaNode b) {
    FormulaNode n;
    n.kind = Kind::Op;
    n.op = op;
    n.children = {std::move(a), std::move(b)};
    return n;
  }
};

inline std::string slot_name(int slot) { return slot == 0 ? "$x" : "$y"; }

// "Div($y.volume, $x.volume)"
inline std::string formula_text(const FormulaNode& n) {
  switch (n.kind) {
    case FormulaNode::Kind::Attr: return slot_name(n.slot) + "." + std::string(to_string(n.attr));
    case FormulaNode::Kind::K: return "$k";
    case FormulaNode::Kind::Literal: return format_exact(n.literal);
    case FormulaNode::Kind::Op: {
      std::string out = std::string(to_string(n.op)) + "(";
      for (std::size_t i = 0; i < n.children.size(); ++i) out += (i ? ", " : "") + formula_text(n.children[i]);
      return out + ")";
    }
  }
  return {};
}

struct Template {
  int id = 0;
  std::string question_pattern;
  FormulaNode formula;
  std::optional<std::pair<int, int>> k_range;

  // Attributes each slot must provide, in slot order.
  std::vector<std::set<Attribute>> required_attrs() const {
    std::vector<std::set<Attribute>> out;
    std::function<void(const FormulaNode&)> walk = [&](const FormulaNode& n) {
      if (n.kind == FormulaNode::Kind::Attr) {
        if (out.size() <= static_cast<std::size_t>(n.slot)) out.resize(n.slot + 1);
        out[n.slot].insert(n.attr);
      }
      for (const auto& c : n.children) walk(c);
    };
    walk(formula);
    return out;
  }
  std::size_t slot_count() const { return required_attrs().size(); }
};

inline constexpr std::pair<int, int> kDefaultKRange{2, 100};

// The twelve templates, numbered 1..12.
inline const std::vector<Template>& templates() {
  static const std::vector<Template> all = [] {
    using A = Attribute;
    using F = FormulaNode;
    const auto X = [](A a) { return F::attribute(0, a); };
    const auto Y = [](A a) { return F::attribute(1, a); };
    const auto div = [](F a, F b) { return F::apply(ArithOp::Div, std::move(a), std::move(b)); };
    const auto mul = [](F a, F b) { return F::apply(ArithOp::Mul, std::move(a), std::move(b)); };
    const auto half = [&](F a) { return div(std::move(a), F::number(2)); };
    std::vector<Template> t = {
        {1, "How many $x fit in $y?", div(Y(A::Volume), X(A::Volume)), {}},
        {2, "How many $x have the same length as $y?", div(Y(A::Length), X(A::Length)), {}},
        {3, "How many $x fit on $y?", div(Y(A::Area), X(A::Area)), {}},
        {4, "How many $y put together contain the same information as $k of $x?",
         mul(F::k(), div(X(A::Data), Y(A::Data))), kDefaultKRange},
        {5, "How long does it take for $x to travel across $y?", div(Y(A::Length), X(A::Speed)), {}},
        {6, "Assume $y's volume is half its value. How many $x fit in $y?", div(Y(A::Volume), half(X(A::Volume))),
         {}},
        {7, "Assume $y's length is half its value. How many $x have the same length as $y?",
         div(Y(A::Length), half(X(A::Length))), {}},
        {8, "Assume $y's area is half its value. How many $x fit on $y?", div(Y(A::Area), half(X(A::Area))), {}},
        {9, "How many $x make up $k kgs?", div(F::k(), X(A::Weight)), kDefaultKRange},
        {10, "How many $x can $k of $y buy?", mul(Y(A::Cost), div(F::k(), X(A::Cost))), kDefaultKRange},
        {11, "How long to digest $k grams of $x?", mul(F::k(), div(X(A::Calories), F::number(65))), kDefaultKRange},
        {12, "If $k of $x were to have the same density as $y, how much would it weigh?",
         mul(F::k(), mul(Y(A::Density), X(A::Volume))), kDefaultKRange},
    };
    return t;
  }();
  return all;
}

inline const Template& template_by_id(int id) {
  for (const auto& t : templates())
    if (t.id == id) return t;
  throw Error(ErrorKind::UsageError, "no template with id " + std::to_string(id));
}

struct Bindings {
  std::vector<std::string> objects;  // slot order
  std::optional<int> k;
  friend auto operator<=>(const Bindings&, const Bindings&) = default;
};

inline std::string render_question(const Template& t, const Bindings& b) {
  std::string out;
  const std::string& p = t.question_pattern;
  for (std::size_t i = 0; i < p.size();) {
    if (p.compare(i, 2, "$x") == 0 && !b.objects.empty()) {
      out += b.objects[0];
      i += 2;
    } else if (p.compare(i, 2, "$y") == 0 && b.objects.size() > 1) {
      out += b.objects[1];
      i += 2;
    } else if (p.compare(i, 2, "$k") == 0 && b.k) {
      out += std::to_string(*b.k);
      i += 2;
    } else {
      out += p[i++];
    }
  }
  return out;
}

// Direct evaluation of the formula on SI magnitudes, mirroring the
// executor's operation order (left fold, Div = a / b).
inline double evaluate_formula(const FormulaNode& n, const KnowledgeBase& kb, const Bindings& b) {
  switch (n.kind) {
    case FormulaNode::Kind::Attr: return kb.object(b.objects.at(n.slot)).at(n.attr).value.magnitude();
    case FormulaNode::Kind::K: return static_cast<double>(b.k.value());
    case FormulaNode::Kind::Literal: return n.literal;
    case FormulaNode::Kind::Op: {
      double acc = evaluate_formula(n.children.front(), kb, b);
      for (std::size_t i = 1; i < n.children.size(); ++i) {
        double rhs = evaluate_formula(n.children[i], kb, b);
        switch (n.op) {
          case ArithOp::Add: acc += rhs; break;
          case ArithOp::Sub: acc -= rhs; break;
          case ArithOp::Mul: acc *= rhs; break;
          case ArithOp::Div: acc /= rhs; break;
        }
      }
      return acc;
    }
  }
  return 0.0;
}

// One attribute reference in a generated program: Qn -> An because Fn.
struct AttributeUse {
  Identifier question;
  Identifier value;
  Identifier fact;
  int slot = 0;
  Attribute attr = Attribute::Length;
  std::string object;
};

struct GeneratedRecord {
  FermiRecord record;  // program stored without fact declarations
  Program program;     // full program including fact declarations
  int template_id = 0;
  Bindings bindings;
  bool decomposed = false;
  std::string pivot;
  std::uint64_t seed = 0;
  std::vector<AttributeUse> uses;
};

namespace detail {

inline std::string attribute_fact(Attribute a, const std::string& object, const std::string& text) {
  return "The " + std::string(to_string(a)) + " of " + object + " is " + text + ".";
}

inline std::string attribute_question(Attribute a, const std::string& object) {
  return "What is the " + std::string(to_string(a)) + " of " + object + "?";
}

class ProgramBuilder {
 public:
  ProgramBuilder(const KnowledgeBase& kb, const Bindings& b) : kb_(kb), bindings_(b) {}

  std::vector<Statement> statements;
  std::vector<AttributeUse> uses;

  void build_root(const FormulaNode& root, const std::string& question) {
    statements.push_back(QuestionDecl{Identifier::question(0), question});
    build(root, Identifier::question(0), false);
  }

 private:
  std::string describe(const FormulaNode& n) const {
    switch (n.kind) {
      case FormulaNode::Kind::Attr:
        return "the " + std::string(to_string(n.attr)) + " of " + bindings_.objects.at(n.slot);
      case FormulaNode::Kind::K: return std::to_string(bindings_.k.value());
      case FormulaNode::Kind::Literal: return format_exact(n.literal);
      case FormulaNode::Kind::Op: {
        const auto& a = n.children[0];
        const auto& b = n.children[1];
        if (n.op == ArithOp::Div && b.kind == FormulaNode::Kind::Literal && b.literal == 2.0)
          return "half of " + describe(a);
        if (n.op == ArithOp::Div) return "the ratio of " + describe(a) + " to " + describe(b);
        if (n.op == ArithOp::Mul) return "the product of " + describe(a) + " and " + describe(b);
        if (n.op == ArithOp::Add) return "the sum of " + describe(a) + " and " + describe(b);
        return "the difference between " + describe(a) + " and " + describe(b);
      }
    }
    return {};
  }

  void build(const FormulaNode& n, Identifier target, bool declare_question) {
    if (n.kind == FormulaNode::Kind::Attr) {
      const std::string& object = bindings_.objects.at(n.slot);
      const AttributeValue& v = kb_.object(object).at(n.attr);
      Identifier value = Identifier::value(next_leaf_);
      Identifier fact = Identifier::fact(next_leaf_);
      ++next_leaf_;
      if (declare_question) statements.push_back(QuestionDecl{target, attribute_question(n.attr, object)});
      statements.push_back(ValueDecl{value, v.text});
      statements.push_back(FactDecl{fact, attribute_fact(n.attr, object, v.text)});
      statements.push_back(CompExpr{target, ValueRef{value, fact}});
      uses.push_back({target, value, fact, n.slot, n.attr, object});
      return;
    }
    // Op node. Sub-question ids are assigned before descending.
    if (declare_question) statements.push_back(QuestionDecl{target, "What is " + describe(n) + "?"});
    MathExpr expr{n.op, {}};
    std::vector<std::pair<const FormulaNode*, Identifier>> pending;
    for (const auto& child : n.children) {
      switch (child.kind) {
        case FormulaNode::Kind::K: expr.args.emplace_back(static_cast<double>(bindings_.k.value())); break;
        case FormulaNode::Kind::Literal: expr.args.emplace_back(child.literal); break;
        default: {
          Identifier q = Identifier::question(next_question_++);
          expr.args.emplace_back(q);
          pending.emplace_back(&child, q);
        }
      }
    }
    statements.push_back(CompExpr{target, std::move(expr)});
    for (const auto& [child, q] : pending) build(*child, q, true);
  }

  const KnowledgeBase& kb_;
  const Bindings& bindings_;
  std::uint32_t next_question_ = 1;
  std::uint32_t next_leaf_ = 1;
};

// Fills record fields (program text, facts, answer) from gen.program.
inline void finalize_record(GeneratedRecord& gen) {
  ExecutionResult result = execute(gen.program, UnitMode::Strict);
  if (!result.valid()) {
    throw Error(result.error().kind, "generated program failed to execute: " + result.error().message,
                gen.record.id);
  }
  std::vector<Statement> without_facts;
  gen.record.facts.clear();
  for (const auto& s : gen.program.statements()) {
    if (auto* f = std::get_if<FactDecl>(&s)) gen.record.facts.push_back({f->id, f->text});
    else without_facts.push_back(s);
  }
  std::sort(gen.record.facts.begin(), gen.record.facts.end(),
            [](const FactEntry& a, const FactEntry& b) { return a.id < b.id; });
  gen.record.program = render_program(Program(std::move(without_facts)));
  gen.record.answer_value = result.value().magnitude();
  gen.record.answer_unit = result.value().dimension().si_unit();
  gen.record.source = Source::Synth;
  SynthMeta meta;
  meta.template_id = gen.template_id;
  meta.bindings = gen.bindings.objects;
  meta.k = gen.bindings.k;
  meta.decomposed = gen.decomposed;
  meta.pivot = gen.pivot;
  meta.seed = gen.seed;
  gen.record.meta = std::move(meta);
}

// Eligible objects per slot for a template.
inline std::vector<std::vector<std::string>> eligible_objects(const Template& t, const KnowledgeBase& kb) {
  std::vector<std::vector<std::string>> out;
  for (const auto& attrs : t.required_attrs()) {
    auto names = objects_with(kb, attrs);
    out.emplace_back(names.begin(), names.end());
  }
  return out;
}

// Draws distinct objects for the slots plus k. Throws NoEligibleObjects or
// SlotCollision when the KB cannot support the template at all.
inline Bindings draw_bindings(const Template& t, const std::vector<std::vector<std::string>>& eligible, Rng& rng) {
  Bindings b;
  for (std::size_t slot = 0; slot < eligible.size(); ++slot) {
    if (eligible[slot].empty()) {
      throw Error(ErrorKind::NoEligibleObjects,
                  "template " + std::to_string(t.id) + ": no object can fill " + slot_name(static_cast<int>(slot)),
                  slot_name(static_cast<int>(slot)));
    }
  }
  if (eligible.size() == 2) {
    // $x candidates that leave at least one distinct choice for $y.
    std::vector<std::string> xs;
    for (const auto& x : eligible[0])
      if (eligible[1].size() > 1 || eligible[1].front() != x) xs.push_back(x);
    if (xs.empty()) {
      throw Error(ErrorKind::SlotCollision,
                  "template " + std::to_string(t.id) + ": cannot pick distinct objects for $x and $y", "$y");
    }
    std::string x = xs[rng.below(xs.size())];
    std::vector<std::string> ys;
    for (const auto& y : eligible[1])
      if (y != x) ys.push_back(y);
    b.objects = {x, ys[rng.below(ys.size())]};
  } else {
    for (const auto& names : eligible) b.objects.push_back(names[rng.below(names.size())]);
  }
  if (t.k_range) b.k = rng.between(t.k_range->first, t.k_range->second);
  return b;
}

inline std::uint64_t count_bindings(const Template& t, const std::vector<std::vector<std::string>>& eligible) {
  std::uint64_t combos = 1;
  if (eligible.size() == 2) {
    std::set<std::string> ys(eligible[1].begin(), eligible[1].end());
    std::uint64_t overlap = 0;
    for (const auto& x : eligible[0]) overlap += ys.contains(x) ? 1 : 0;
    combos = eligible[0].size() * eligible[1].size() - overlap;
  } else {
    for (const auto& names : eligible) combos *= names.size();
  }
  if (t.k_range) combos *= static_cast<std::uint64_t>(t.k_range->second - t.k_range->first + 1);
  return combos;
}

inline std::vector<std::string> pivot_candidates(const KnowledgeBase& kb, const AttributeUse& use,
                                                 const Bindings& b) {
  std::vector<std::string> out;
  for (const auto& name : kb.objects_having(use.attr))
    if (std::find(b.objects.begin(), b.objects.end(), name) == b.objects.end()) out.push_back(name);
  return out;
}

}  // namespace detail

// Builds the record for fixed bindings.
inline GeneratedRecord instantiate_with(const Template& t, const KnowledgeBase& kb, const Bindings& bindings,
                                        std::uint64_t seed = 0) {
  auto required = t.required_attrs();
  if (bindings.objects.size() != required.size())
    throw Error(ErrorKind::UsageError, "template " + std::to_string(t.id) + " needs " +
                                           std::to_string(required.size()) + " objects");
  for (std::size_t slot = 0; slot < required.size(); ++slot) {
    const auto& name = bindings.objects[slot];
    for (auto a : required[slot]) {
      if (!kb.contains(name) || !kb.object(name).has(a))
        throw Error(ErrorKind::NoEligibleObjects,
                    "'" + name + "' has no " + std::string(to_string(a)) + " for " + slot_name(int(slot)), name);
    }
  }
  if (bindings.objects.size() == 2 && bindings.objects[0] == bindings.objects[1])
    throw Error(ErrorKind::SlotCollision, "$x and $y must be distinct objects", bindings.objects[0]);
  if (t.k_range.has_value() != bindings.k.has_value())
    throw Error(ErrorKind::UsageError, "template " + std::to_string(t.id) + " k binding mismatch");

  GeneratedRecord gen;
  gen.template_id = t.id;
  gen.bindings = bindings;
  gen.seed = seed;
  gen.record.question = render_question(t, bindings);
  detail::ProgramBuilder builder(kb, bindings);
  builder.build_root(t.formula, gen.record.question);
  gen.program = Program(std::move(builder.statements));
  gen.uses = std::move(builder.uses);
  detail::finalize_record(gen);
  return gen;
}

// Draws objects (and k) with a seeded RNG, then instantiates.
inline GeneratedRecord instantiate(const Template& t, const KnowledgeBase& kb, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  Bindings b = detail::draw_bindings(t, detail::eligible_objects(t, kb), rng);
  return instantiate_with(t, kb, b, rng_seed);
}

inline bool can_decompose(const GeneratedRecord& gen, const KnowledgeBase& kb) {
  for (const auto& use : gen.uses)
    if (!detail::pivot_candidates(kb, use, gen.bindings).empty()) return true;
  return false;
}

// Rewrites one attribute value o.a as Mul(ratio, z.a). The answer is
// re-executed and changes by at most rounding.
inline GeneratedRecord decompose(const GeneratedRecord& input, const KnowledgeBase& kb, std::uint64_t rng_seed) {
  if (input.decomposed) throw Error(ErrorKind::UsageError, "record is already decomposed", input.record.id);
  Rng rng(rng_seed);
  std::vector<std::size_t> order(input.uses.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  // Deepest leaves first, so the rewrite deepens the whole program when it can.
  std::map<Identifier, int> level;
  std::function<void(Identifier, int)> walk = [&](Identifier q, int d) {
    level[q] = std::max(level[q], d);
    for (const auto& s : input.program.statements())
      if (auto* c = std::get_if<CompExpr>(&s); c && c->target == q)
        if (auto* m = std::get_if<MathExpr>(&c->body))
          for (const auto& arg : m->args)
            if (auto* sub = std::get_if<Identifier>(&arg)) walk(*sub, d + 1);
  };
  walk(Program::root(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return level[input.uses[a].question] > level[input.uses[b].question];
  });

  for (std::size_t pick : order) {
    const AttributeUse& use = input.uses[pick];
    auto pivots = detail::pivot_candidates(kb, use, input.bindings);
    if (pivots.empty()) continue;
    const std::string& pivot = pivots[rng.below(pivots.size())];
    const AttributeValue& own = kb.object(use.object).at(use.attr);
    const AttributeValue& other = kb.object(pivot).at(use.attr);
    std::string ratio = format_exact(own.value.magnitude() / other.value.magnitude());

    std::uint32_t max_q = 0, max_leaf = 0;
    for (const auto& s : input.program.statements()) {
      Identifier id = statement_id(s);
      if (id.kind == IdKind::Question) max_q = std::max(max_q, id.index);
      else max_leaf = std::max(max_leaf, id.index);
    }
    Identifier q_ratio = Identifier::question(max_q + 1);
    Identifier q_pivot = Identifier::question(max_q + 2);
    Identifier a_pivot = Identifier::value(max_leaf + 1);
    Identifier f_pivot = Identifier::fact(max_leaf + 1);
    std::string attr(to_string(use.attr));

    std::vector<Statement> out;
    for (const auto& s : input.program.statements()) {
      if (auto* c = std::get_if<CompExpr>(&s); c && c->target == use.question) {
        out.push_back(CompExpr{use.question, MathExpr{ArithOp::Mul, {q_ratio, q_pivot}}});
      } else if (auto* v = std::get_if<ValueDecl>(&s); v && v->id == use.value) {
        out.push_back(ValueDecl{use.value, ratio});
      } else if (auto* f = std::get_if<FactDecl>(&s); f && f->id == use.fact) {
        out.push_back(FactDecl{use.fact, "The " + attr + " of " + use.object + " is " + ratio + " times that of " +
                                             pivot + "."});
      } else {
        out.push_back(s);
      }
    }
    out.push_back(QuestionDecl{q_ratio, "What is the ratio of the " + attr + " of " + use.object + " and that of " +
                                            pivot + "?"});
    out.push_back(CompExpr{q_ratio, ValueRef{use.value, use.fact}});
    out.push_back(QuestionDecl{q_pivot, detail::attribute_question(use.attr, pivot)});
    out.push_back(ValueDecl{a_pivot, other.text});
    out.push_back(FactDecl{f_pivot, detail::attribute_fact(use.attr, pivot, other.text)});
    out.push_back(CompExpr{q_pivot, ValueRef{a_pivot, f_pivot}});

    GeneratedRecord gen = input;
    gen.program = Program(std::move(out));
    gen.decomposed = true;
    gen.pivot = pivot;
    gen.uses[pick] = AttributeUse{q_ratio, use.value, use.fact, use.slot, use.attr, use.object};
    gen.uses.push_back(AttributeUse{q_pivot, a_pivot, f_pivot, -1, use.attr, pivot});
    detail::finalize_record(gen);
    return gen;
  }
  throw Error(ErrorKind::NoPivotObject, "no pivot object available for decomposition", input.record.id);
}

// ---------------------------------------------------------------------------
// Dataset generation

struct GenerationConfig {
  std::size_t size = 0;
  double decompose_fraction = 0.5;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

struct GeneratedDataset {
  std::vector<GeneratedRecord> records;
  std::map<int, std::size_t> per_template;
  std::size_t decomposed = 0;
  std::map<Split, std::size_t> splits;
};

// Per-template quota: equal shares, the remainder going to the lowest ids.
inline std::map<int, std::size_t> template_quota(std::size_t size) {
  std::map<int, std::size_t> out;
  const std::size_t n = templates().size();
  for (std::size_t i = 0; i < n; ++i) out[templates()[i].id] = size / n + (i < size % n ? 1 : 0);
  return out;
}

inline GeneratedDataset generate_dataset(const KnowledgeBase& kb, const GenerationConfig& config) {
  if (config.size < templates().size())
    throw Error(ErrorKind::UsageError, "dataset size must be at least " + std::to_string(templates().size()));
  if (!(config.decompose_fraction >= 0.0 && config.decompose_fraction <= 1.0))
    throw Error(ErrorKind::UsageError, "decompose fraction must lie in [0, 1]");

  auto quota = template_quota(config.size);
  std::map<int, std::vector<std::vector<std::string>>> eligible;
  for (const auto& t : templates()) {
    eligible[t.id] = detail::eligible_objects(t, kb);
    std::uint64_t combos = 0;
    try {
      Rng probe(0);
      (void)detail::draw_bindings(t, eligible[t.id], probe);
      combos = detail::count_bindings(t, eligible[t.id]);
    } catch (const Error&) {
      combos = 0;
    }
    if (combos < quota[t.id]) {
      throw Error(ErrorKind::KbTooSmall, "template " + std::to_string(t.id) + " needs " +
                                             std::to_string(quota[t.id]) + " distinct instantiations, the KB allows " +
                                             std::to_string(combos));
    }
  }

  Rng rng(config.seed);
  std::vector<int> slots;
  for (const auto& [id, n] : quota) slots.insert(slots.end(), n, id);
  rng.shuffle(slots);

  std::set<std::pair<int, Bindings>> seen;
  std::vector<Bindings> bindings(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const Template& t = template_by_id(slots[i]);
    while (true) {
      Bindings b = detail::draw_bindings(t, eligible[t.id], rng);
      if (seen.emplace(t.id, b).second) {
        bindings[i] = std::move(b);
        break;
      }
    }
  }

  GeneratedDataset ds;
  ds.records.resize(slots.size());
  const int width = static_cast<int>(std::to_string(slots.size()).size());
  parallel_for(slots.size(), config.jobs, [&](std::size_t i) {
    std::uint64_t seed = mix_seed(config.seed, i);
    ds.records[i] = instantiate_with(template_by_id(slots[i]), kb, bindings[i], seed);
    std::string num = std::to_string(i + 1);
    ds.records[i].record.id = "synth-" + std::string(width - static_cast<int>(num.size()), '0') + num;
  });

  // Decompose an exact share, chosen among records that admit a pivot.
  const auto target = static_cast<std::size_t>(std::llround(config.decompose_fraction * double(config.size)));
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    if (can_decompose(ds.records[i], kb)) candidates.push_back(i);
  if (candidates.size() < target) {
    throw Error(ErrorKind::KbTooSmall, "only " + std::to_string(candidates.size()) +
                                           " records admit a decomposition pivot, " + std::to_string(target) +
                                           " requested");
  }
  rng.shuffle(candidates);
  candidates.resize(target);
  std::sort(candidates.begin(), candidates.end());
  parallel_for(candidates.size(), config.jobs, [&](std::size_t c) {
    std::size_t i = candidates[c];
    std::string id = ds.records[i].record.id;
    ds.records[i] = decompose(ds.records[i], kb, mix_seed(ds.records[i].seed, 1));
    ds.records[i].record.id = id;
  });

  // 80/10/10 split over a seeded shuffle.
  std::vector<std::size_t> order(ds.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::llround(0.8 * double(order.size())));
  const auto n_valid = static_cast<std::size_t>(std::llround(0.1 * double(order.size())));
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    Split s = pos < n_train ? Split::Train : pos < n_train + n_valid ? Split::Validation : Split::Test;
    ds.records[order[pos]].record.split = s;
  }

  for (const auto& g : ds.records) {
    ++ds.per_template[g.template_id];
    ds.decomposed += g.decomposed ? 1 : 0;
    ++ds.splits[g.record.split];
  }
  return ds;
}

// FNV-1a over the canonical KB text, so comments and line order don't matter.
inline std::string kb_fingerprint(const KnowledgeBase& kb) {
  std::ostringstream canonical;
  save_kb(kb, canonical);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(h));
  return buf.data();
}

inline nlohmann::ordered_json generation_manifest(const GeneratedDataset& ds, const GenerationConfig& config,
                                                  const KnowledgeBase& kb) {
  nlohmann::ordered_json j;
  j["format"] = "fermi-synth-manifest";
  j["version"] = 1;
  j["seed"] = config.seed;
  j["size"] = config.size;
  j["decompose_fraction"] = config.decompose_fraction;
  j["kb_hash"] = kb_fingerprint(kb);
  j["kb_objects"] = kb.size();
  nlohmann::ordered_json counts;
  for (const auto& [id, n] : ds.per_template) counts[std::to_string(id)] = n;
  j["per_template"] = counts;
  j["decomposed"] = ds.decomposed;
  nlohmann::ordered_json splits;
  for (const auto& [s, n] : ds.splits) splits[std::string(to_string(s))] = n;
  j["splits"] = splits;
  return j;
}

}  // namespace fermi
