#pragma once

// Knowledge base of object attributes used by the synthetic generator.
//
// File format, one attribute value per line:
//
//   object-name | attribute | number unit | source
//
// '#' at the start of a line marks a comment; blank lines are ignored. An
// object is the union of its lines. Names may not contain '|'. Calories are
// dimensionless kcal counts and are written without a unit.

#include <array>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fermi/error.hpp"
#include "fermi/units.hpp"

namespace fermi {

enum class Attribute : std::uint8_t {
  Length,
  Area,
  Volume,
  Weight,
  Density,
  Speed,
  Time,
  Data,
  Cost,
  Calories,
};

inline constexpr std::array<Attribute, 10> kAllAttributes = {
    Attribute::Length, Attribute::Area,  Attribute::Volume, Attribute::Weight, Attribute::Density,
    Attribute::Speed,  Attribute::Time,  Attribute::Data,   Attribute::Cost,   Attribute::Calories,
};

inline std::string_view to_string(Attribute a) {
  switch (a) {
    case Attribute::Length: return "length";
    case Attribute::Area: return "area";
    case Attribute::Volume: return "volume";
    case Attribute::Weight: return "weight";
    case Attribute::Density: return "density";
    case Attribute::Speed: return "speed";
    case Attribute::Time: return "time";
    case Attribute::Data: return "data";
    case Attribute::Cost: return "cost";
    case Attribute::Calories: return "calories";
  }
  return "?";
}

// "mass" is accepted for weight.
inline std::optional<Attribute> parse_attribute(std::string_view s) {
  for (auto a : kAllAttributes)
    if (to_string(a) == s) return a;
  if (s == "mass") return Attribute::Weight;
  return std::nullopt;
}

inline Dimension expected_dimension(Attribute a) {
  using enum BaseDim;
  const Dimension L = Dimension::of(Length);
  switch (a) {
    case Attribute::Length: return L;
    case Attribute::Area: return L.pow(2);
    case Attribute::Volume: return L.pow(3);
    case Attribute::Weight: return Dimension::of(Mass);
    case Attribute::Density: return Dimension::of(Mass) / L.pow(3);
    case Attribute::Speed: return L / Dimension::of(Time);
    case Attribute::Time: return Dimension::of(Time);
    case Attribute::Data: return Dimension::of(Information);
    case Attribute::Cost: return Dimension::of(Currency);
    case Attribute::Calories: return Dimension::none();
  }
  return {};
}

struct AttributeValue {
  Quantity value;     // SI
  std::string text;   // as written, e.g. "0.67 ft**3"
  std::string source;
  friend bool operator==(const AttributeValue& a, const AttributeValue& b) {
    return a.value.magnitude() == b.value.magnitude() && a.value.dimension() == b.value.dimension() &&
           a.text == b.text && a.source == b.source;
  }
};

struct KbObject {
  std::string name;
  std::map<Attribute, AttributeValue> attributes;

  bool has(Attribute a) const { return attributes.contains(a); }
  const AttributeValue& at(Attribute a) const { return attributes.at(a); }

  // Distinct sources, in attribute order.
  std::string provenance() const {
    std::string out;
    std::set<std::string> seen;
    for (const auto& [_, v] : attributes) {
      if (v.source.empty() || !seen.insert(v.source).second) continue;
      if (!out.empty()) out += "; ";
      out += v.source;
    }
    return out;
  }

  friend bool operator==(const KbObject&, const KbObject&) = default;
};

struct KbDiagnostic {
  int line = 0;
  ErrorKind kind = ErrorKind::SchemaError;
  std::string message;
};

class KnowledgeBase {
 public:
  KnowledgeBase() = default;

  // Throws SchemaError/DimensionError on duplicates, bad values or a
  // dimension that doesn't fit the attribute.
  void add(const std::string& name, Attribute attr, AttributeValue value) {
    if (name.empty() || name.find('|') != std::string::npos)
      throw Error(ErrorKind::SchemaError, "bad object name '" + name + "'", name);
    if (!(value.value.magnitude() > 0))
      throw Error(ErrorKind::SchemaError, name + ": " + std::string(to_string(attr)) + " must be positive", name);
    if (value.value.dimension() != expected_dimension(attr)) {
      throw Error(ErrorKind::DimensionError,
                  name + ": " + std::string(to_string(attr)) + " has dimension [" +
                      value.value.dimension().si_unit() + "], expected [" + expected_dimension(attr).si_unit() + "]",
                  name);
    }
    auto& obj = objects_[name];
    obj.name = name;
    if (obj.attributes.contains(attr))
      throw Error(ErrorKind::SchemaError, "duplicate " + std::string(to_string(attr)) + " for '" + name + "'", name);
    obj.attributes.emplace(attr, std::move(value));
    index_[attr].insert(name);
  }

  const std::map<std::string, KbObject>& objects() const { return objects_; }
  std::size_t size() const { return objects_.size(); }
  const KbObject& object(const std::string& name) const {
    auto it = objects_.find(name);
    if (it == objects_.end()) throw Error(ErrorKind::SchemaError, "no object named '" + name + "'", name);
    return it->second;
  }
  bool contains(const std::string& name) const { return objects_.contains(name); }

  const std::set<std::string>& objects_having(Attribute a) const {
    static const std::set<std::string> empty;
    auto it = index_.find(a);
    return it == index_.end() ? empty : it->second;
  }

  std::size_t value_count() const {
    std::size_t n = 0;
    for (const auto& [_, o] : objects_) n += o.attributes.size();
    return n;
  }

  friend bool operator==(const KnowledgeBase& a, const KnowledgeBase& b) { return a.objects_ == b.objects_; }

 private:
  std::map<std::string, KbObject> objects_;
  std::map<Attribute, std::set<std::string>> index_;
};

// Names of objects that have every attribute in `attrs`.
inline std::set<std::string> objects_with(const KnowledgeBase& kb, const std::set<Attribute>& attrs) {
  if (attrs.empty()) throw Error(ErrorKind::UsageError, "objects_with needs at least one attribute");
  auto it = attrs.begin();
  std::set<std::string> out = kb.objects_having(*it);
  for (++it; it != attrs.end() && !out.empty(); ++it) {
    const auto& other = kb.objects_having(*it);
    std::erase_if(out, [&](const std::string& n) { return !other.contains(n); });
  }
  return out;
}

// Parses a KB stream, collecting every problem instead of stopping at the
// first. Lines with problems are skipped.
inline KnowledgeBase parse_kb(std::istream& in, std::vector<KbDiagnostic>& diagnostics,
                              const UnitRegistry& registry = default_registry()) {
  KnowledgeBase kb;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      auto bar = view.find('|', start);
      fields.push_back(trim(view.substr(start, bar == std::string_view::npos ? std::string_view::npos : bar - start)));
      if (bar == std::string_view::npos) break;
      start = bar + 1;
    }
    auto report = [&](ErrorKind kind, std::string msg) { diagnostics.push_back({line_no, kind, std::move(msg)}); };
    if (fields.size() != 4) {
      report(ErrorKind::SchemaError, "expected 4 '|'-separated fields, got " + std::to_string(fields.size()));
      continue;
    }
    std::string name(fields[0]);
    if (name.empty()) {
      report(ErrorKind::SchemaError, "empty object name");
      continue;
    }
    auto attr = parse_attribute(fields[1]);
    if (!attr) {
      report(ErrorKind::SchemaError, "unknown attribute '" + std::string(fields[1]) + "'");
      continue;
    }
    try {
      Quantity q = parse_quantity(fields[2], registry);
      kb.add(name, *attr, AttributeValue{q, std::string(fields[2]), std::string(fields[3])});
    } catch (const Error& e) {
      ErrorKind kind = e.kind() == ErrorKind::DimensionError ? ErrorKind::DimensionError : ErrorKind::SchemaError;
      report(kind, e.what());
    }
  }
  return kb;
}

inline std::string format_diagnostic(const KbDiagnostic& d, const std::string& source = {}) {
  std::string where = source.empty() ? "line " + std::to_string(d.line) : source + ":" + std::to_string(d.line);
  return where + ": " + std::string(to_string(d.kind)) + ": " + d.message;
}

// Strict loader: the first diagnostic is raised as an Error.
inline KnowledgeBase load_kb(std::istream& in, const std::string& source = "<stream>",
                             const UnitRegistry& registry = default_registry()) {
  std::vector<KbDiagnostic> diagnostics;
  KnowledgeBase kb = parse_kb(in, diagnostics, registry);
  if (!diagnostics.empty()) {
    const auto& d = diagnostics.front();
    throw Error(d.kind, format_diagnostic(d, source), source + ":" + std::to_string(d.line));
  }
  return kb;
}

inline KnowledgeBase load_kb(const std::string& path, const UnitRegistry& registry = default_registry()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'", path);
  return load_kb(in, path, registry);
}

inline void save_kb(const KnowledgeBase& kb, std::ostream& out) {
  for (const auto& [name, obj] : kb.objects())
    for (const auto& [attr, v] : obj.attributes)
      out << name << " | " << to_string(attr) << " | " << v.text << " | " << v.source << '\n';
}

}  // namespace fermi
