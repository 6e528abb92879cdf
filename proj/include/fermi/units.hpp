#pragma once

// Physical quantities normalized to SI. Values are IEEE doubles tagged with a
// Dimension (integer exponents over the seven SI base dimensions plus the
// information and currency pseudo-dimensions). Unit expressions such as
// "ft**3", "kg m**-3" or "km/h" are resolved through a UnitRegistry.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "fermi/error.hpp"

namespace fermi {

// ---------------------------------------------------------------------------
// Number formatting

// Shortest decimal text that parses back to exactly `value`.
inline std::string format_exact(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) return std::to_string(value);
  return std::string(buf.data(), end);
}

// Human-facing rendering with a bounded number of significant digits.
inline std::string format_significant(double value, int digits = 10) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.*g", digits, value);
  return std::string(buf.data());
}

inline std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// ---------------------------------------------------------------------------
// Dimension

enum class BaseDim : std::size_t {
  Length,
  Mass,
  Time,
  Current,
  Temperature,
  Amount,
  Luminosity,
  Information,
  Currency,
};

inline constexpr std::size_t kNumBaseDims = 9;

struct Dimension {
  std::array<std::int8_t, kNumBaseDims> exponents{};

  static Dimension none() { return {}; }
  static Dimension of(BaseDim base, int power = 1) {
    Dimension d;
    d.exponents[static_cast<std::size_t>(base)] = static_cast<std::int8_t>(power);
    return d;
  }

  bool dimensionless() const {
    return std::all_of(exponents.begin(), exponents.end(), [](auto e) { return e == 0; });
  }

  int operator[](BaseDim base) const { return exponents[static_cast<std::size_t>(base)]; }

  friend Dimension operator*(const Dimension& a, const Dimension& b) {
    Dimension out;
    for (std::size_t i = 0; i < kNumBaseDims; ++i)
      out.exponents[i] = static_cast<std::int8_t>(a.exponents[i] + b.exponents[i]);
    return out;
  }
  friend Dimension operator/(const Dimension& a, const Dimension& b) {
    Dimension out;
    for (std::size_t i = 0; i < kNumBaseDims; ++i)
      out.exponents[i] = static_cast<std::int8_t>(a.exponents[i] - b.exponents[i]);
    return out;
  }
  Dimension pow(int power) const {
    Dimension out;
    for (std::size_t i = 0; i < kNumBaseDims; ++i)
      out.exponents[i] = static_cast<std::int8_t>(exponents[i] * power);
    return out;
  }

  friend bool operator==(const Dimension&, const Dimension&) = default;
  friend auto operator<=>(const Dimension&, const Dimension&) = default;

  // Canonical SI unit text, e.g. "m**3", "kg*m**-3", "" for dimensionless.
  // Positive exponents come first so the text reads naturally.
  std::string si_unit() const {
    static constexpr std::array<std::string_view, kNumBaseDims> symbols = {
        "m", "kg", "s", "A", "K", "mol", "cd", "B", "USD"};
    std::string out;
    auto emit = [&](std::size_t i) {
      if (!out.empty()) out += '*';
      out += symbols[i];
      if (exponents[i] != 1) {
        out += "**";
        out += std::to_string(exponents[i]);
      }
    };
    for (std::size_t i = 0; i < kNumBaseDims; ++i)
      if (exponents[i] > 0) emit(i);
    for (std::size_t i = 0; i < kNumBaseDims; ++i)
      if (exponents[i] < 0) emit(i);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Quantity

inline constexpr double kDefaultRelTol = 1e-9;

inline bool approx_equal(double a, double b, double rel_tol = kDefaultRelTol) {
  if (a == b) return true;
  return std::fabs(a - b) <= rel_tol * std::max(std::fabs(a), std::fabs(b));
}

class Quantity {
 public:
  Quantity() = default;
  explicit Quantity(double magnitude, Dimension dimension = {})
      : magnitude_(magnitude), dimension_(dimension) {
    if (!std::isfinite(magnitude))
      throw Error(ErrorKind::NonFiniteValue, "quantity magnitude is not finite");
  }

  double magnitude() const { return magnitude_; }
  const Dimension& dimension() const { return dimension_; }
  bool dimensionless() const { return dimension_.dimensionless(); }

  bool approx(const Quantity& other, double rel_tol) const {
    return dimension_ == other.dimension_ && approx_equal(magnitude_, other.magnitude_, rel_tol);
  }
  friend bool operator==(const Quantity& a, const Quantity& b) { return a.approx(b, kDefaultRelTol); }

 private:
  double magnitude_ = 0.0;
  Dimension dimension_;
};

// ---------------------------------------------------------------------------
// Unit registry

struct UnitSpec {
  double factor = 1.0;  // SI value of one unit
  Dimension dimension;

  friend bool operator==(const UnitSpec&, const UnitSpec&) = default;
};

class UnitRegistry {
 public:
  // Registry with SI base/derived units plus the customary units that show
  // up in Fermi-style annotations.
  static UnitRegistry builtin();

  bool contains(std::string_view token) const { return units_.find(std::string(token)) != units_.end(); }

  const UnitSpec* find(std::string_view token) const {
    auto it = units_.find(std::string(token));
    return it == units_.end() ? nullptr : &it->second;
  }

  // Adds a token. Re-adding an identical definition is a no-op; a conflicting
  // one throws SchemaError.
  void add(std::string token, UnitSpec spec) {
    if (token.empty()) throw Error(ErrorKind::SchemaError, "empty unit token");
    auto [it, inserted] = units_.emplace(token, spec);
    if (!inserted && !(it->second == spec))
      throw Error(ErrorKind::SchemaError, "conflicting definition for unit '" + token + "'", token);
  }

  // Extension file: one unit per line, `token factor e1,e2,...,e9`, with the
  // exponents ordered m,kg,s,A,K,mol,cd,B,USD. '#' starts a comment.
  void load_extension(std::istream& in);

  // Resolves a unit expression: factors joined by whitespace, '*' or '/',
  // each optionally raised with '**n' or '^n'. Empty text is dimensionless.
  UnitSpec parse_unit(std::string_view text) const;

  std::vector<std::string> tokens() const {
    std::vector<std::string> out;
    out.reserve(units_.size());
    for (const auto& [token, _] : units_) out.push_back(token);
    return out;
  }

  std::size_t size() const { return units_.size(); }

 private:
  std::map<std::string, UnitSpec, std::less<>> units_;
};

inline const UnitRegistry& default_registry() {
  static const UnitRegistry registry = UnitRegistry::builtin();
  return registry;
}

inline UnitRegistry UnitRegistry::builtin() {
  using enum BaseDim;
  const Dimension L = Dimension::of(Length);
  const Dimension M = Dimension::of(Mass);
  const Dimension T = Dimension::of(Time);
  const Dimension I = Dimension::of(Current);
  const Dimension energy = M * L.pow(2) / T.pow(2);
  const Dimension power = energy / T;
  const Dimension info = Dimension::of(Information);
  const Dimension money = Dimension::of(Currency);
  const Dimension speed = L / T;

  UnitRegistry r;
  auto add_all = [&r](std::initializer_list<std::string_view> tokens, double factor, Dimension dim) {
    for (auto t : tokens) r.add(std::string(t), {factor, dim});
  };

  // length
  add_all({"m", "meter", "meters", "metre", "metres"}, 1.0, L);
  add_all({"km", "kilometer", "kilometers", "kilometre", "kilometres"}, 1e3, L);
  add_all({"cm", "centimeter", "centimeters"}, 1e-2, L);
  add_all({"mm", "millimeter", "millimeters"}, 1e-3, L);
  add_all({"um", "micrometer", "micrometers"}, 1e-6, L);
  add_all({"nm", "nanometer", "nanometers"}, 1e-9, L);
  add_all({"in", "inch", "inches"}, 0.0254, L);
  add_all({"ft", "foot", "feet"}, 0.3048, L);
  add_all({"yd", "yard", "yards"}, 0.9144, L);
  add_all({"mi", "mile", "miles"}, 1609.344, L);
  add_all({"nmi"}, 1852.0, L);
  add_all({"au"}, 1.495978707e11, L);
  add_all({"ly"}, 9.4607304725808e15, L);
  // area and volume with dedicated names
  add_all({"ha", "hectare", "hectares"}, 1e4, L.pow(2));
  add_all({"acre", "acres"}, 4046.8564224, L.pow(2));
  add_all({"L", "l", "liter", "liters", "litre", "litres"}, 1e-3, L.pow(3));
  add_all({"mL", "ml", "milliliter", "milliliters"}, 1e-6, L.pow(3));
  add_all({"gal", "gallon", "gallons"}, 3.785411784e-3, L.pow(3));
  // mass
  add_all({"kg", "kilogram", "kilograms", "kgs"}, 1.0, M);
  add_all({"g", "gram", "grams"}, 1e-3, M);
  add_all({"mg", "milligram", "milligrams"}, 1e-6, M);
  add_all({"t", "tonne", "tonnes"}, 1e3, M);
  add_all({"ton", "tons"}, 907.18474, M);
  add_all({"lb", "lbs", "pound", "pounds"}, 0.45359237, M);
  add_all({"oz", "ounce", "ounces"}, 0.028349523125, M);
  // time
  add_all({"s", "sec", "second", "seconds"}, 1.0, T);
  add_all({"ms", "millisecond", "milliseconds"}, 1e-3, T);
  add_all({"min", "minute", "minutes"}, 60.0, T);
  add_all({"h", "hr", "hour", "hours"}, 3600.0, T);
  add_all({"day", "days"}, 86400.0, T);
  add_all({"week", "weeks"}, 604800.0, T);
  add_all({"month", "months"}, 2629800.0, T);  // year / 12
  add_all({"year", "years", "yr"}, 31557600.0, T);  // Julian year
  // speed
  add_all({"mph"}, 0.44704, speed);
  add_all({"kph"}, 1000.0 / 3600.0, speed);
  add_all({"knot", "knots"}, 1852.0 / 3600.0, speed);
  // remaining SI base units
  add_all({"A", "ampere", "amperes"}, 1.0, I);
  add_all({"K", "kelvin"}, 1.0, Dimension::of(Temperature));
  add_all({"mol"}, 1.0, Dimension::of(Amount));
  add_all({"cd"}, 1.0, Dimension::of(Luminosity));
  // derived
  add_all({"N", "newton", "newtons"}, 1.0, M * L / T.pow(2));
  add_all({"Pa"}, 1.0, M / L / T.pow(2));
  add_all({"Hz"}, 1.0, T.pow(-1));
  add_all({"J", "joule", "joules"}, 1.0, energy);
  add_all({"kJ"}, 1e3, energy);
  add_all({"cal"}, 4.184, energy);
  add_all({"kcal"}, 4184.0, energy);
  add_all({"Wh"}, 3600.0, energy);
  add_all({"kWh"}, 3.6e6, energy);
  add_all({"W", "watt", "watts"}, 1.0, power);
  add_all({"kW"}, 1e3, power);
  add_all({"V", "volt", "volts"}, 1.0, power / I);
  // information (byte is the unit)
  add_all({"bit", "bits"}, 0.125, info);
  add_all({"B", "byte", "bytes"}, 1.0, info);
  add_all({"KB", "kB", "kilobyte", "kilobytes"}, 1e3, info);
  add_all({"MB", "megabyte", "megabytes"}, 1e6, info);
  add_all({"GB", "gigabyte", "gigabytes"}, 1e9, info);
  add_all({"TB", "terabyte", "terabytes"}, 1e12, info);
  add_all({"PB", "petabyte", "petabytes"}, 1e15, info);
  // currency
  add_all({"USD", "dollar", "dollars"}, 1.0, money);
  add_all({"cent", "cents"}, 0.01, money);
  return r;
}

namespace detail {

inline bool is_unit_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

inline std::optional<int> parse_int(std::string_view text, std::size_t& pos) {
  std::size_t start = pos;
  if (pos < text.size() && (text[pos] == '-' || text[pos] == '+')) ++pos;
  std::size_t digits = pos;
  while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
  if (pos == digits) {
    pos = start;
    return std::nullopt;
  }
  std::string_view num = text.substr(start, pos - start);
  if (num.front() == '+') num.remove_prefix(1);
  int value = 0;
  auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), value);
  if (ec != std::errc{} || ptr != num.data() + num.size()) {
    pos = start;
    return std::nullopt;
  }
  return value;
}

}  // namespace detail

inline UnitSpec UnitRegistry::parse_unit(std::string_view text) const {
  UnitSpec out;
  std::size_t pos = 0;
  bool divide_next = false;
  bool expect_factor = true;
  auto skip_ws = [&] {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  };
  skip_ws();
  while (pos < text.size()) {
    if (!expect_factor) {
      if (text[pos] == '*' && !(pos + 1 < text.size() && text[pos + 1] == '*')) {
        ++pos;
      } else if (text[pos] == '/') {
        divide_next = true;
        ++pos;
      }
      skip_ws();
    }
    std::size_t start = pos;
    while (pos < text.size() && detail::is_unit_char(text[pos])) ++pos;
    if (pos == start) {
      throw Error(ErrorKind::UnknownUnit, "malformed unit expression '" + std::string(text) + "'",
                  std::string(text));
    }
    std::string_view token = text.substr(start, pos - start);
    const UnitSpec* spec = find(token);
    if (spec == nullptr) {
      throw Error(ErrorKind::UnknownUnit, "unknown unit '" + std::string(token) + "'", std::string(token));
    }
    int power = 1;
    if (text.substr(pos, 2) == "**" || text.substr(pos, 1) == "^") {
      pos += text[pos] == '^' ? 1 : 2;
      auto p = detail::parse_int(text, pos);
      if (!p || *p < -64 || *p > 64) {
        throw Error(ErrorKind::UnknownUnit, "bad exponent in unit expression '" + std::string(text) + "'",
                    std::string(text));
      }
      power = *p;
    }
    if (divide_next) power = -power;
    divide_next = false;
    out.factor *= std::pow(spec->factor, power);
    out.dimension = out.dimension * spec->dimension.pow(power);
    expect_factor = false;
    skip_ws();
  }
  if (divide_next) {
    throw Error(ErrorKind::UnknownUnit, "dangling '/' in unit expression '" + std::string(text) + "'",
                std::string(text));
  }
  return out;
}

inline void UnitRegistry::load_extension(std::istream& in) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    std::istringstream fields{std::string(view)};
    std::string token, factor_text, dims_text, extra;
    fields >> token >> factor_text >> dims_text;
    auto where = "line " + std::to_string(line_no);
    if (dims_text.empty() || (fields >> extra)) {
      throw Error(ErrorKind::SchemaError, where + ": expected `token factor dimension-vector`", where);
    }
    double factor = 0.0;
    auto [ptr, ec] = std::from_chars(factor_text.data(), factor_text.data() + factor_text.size(), factor);
    if (ec != std::errc{} || ptr != factor_text.data() + factor_text.size() || !(factor > 0) ||
        !std::isfinite(factor)) {
      throw Error(ErrorKind::SchemaError, where + ": bad factor '" + factor_text + "'", where);
    }
    for (char c : token) {
      if (!detail::is_unit_char(c))
        throw Error(ErrorKind::SchemaError, where + ": unit tokens must be letters or '_'", where);
    }
    Dimension dim;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < kNumBaseDims; ++i) {
      auto e = detail::parse_int(dims_text, pos);
      if (!e || *e < -64 || *e > 64)
        throw Error(ErrorKind::SchemaError, where + ": bad dimension vector '" + dims_text + "'", where);
      dim.exponents[i] = static_cast<std::int8_t>(*e);
      if (i + 1 < kNumBaseDims) {
        if (pos >= dims_text.size() || dims_text[pos] != ',')
          throw Error(ErrorKind::SchemaError, where + ": dimension vector needs 9 entries", where);
        ++pos;
      }
    }
    if (pos != dims_text.size())
      throw Error(ErrorKind::SchemaError, where + ": dimension vector needs 9 entries", where);
    add(token, {factor, dim});
  }
}

// ---------------------------------------------------------------------------
// Parsing and rendering quantities

struct QuantityParse {
  Quantity quantity;
  std::string unit_text;               // unit expression as written (trimmed)
  std::optional<std::string> warning;  // set when lenient parsing dropped the unit
};

namespace detail {

// Splits "  6.9e+12 ft**3" into the number and the trailing unit text.
inline std::pair<double, std::string_view> split_number(std::string_view text) {
  std::string_view s = trim(text);
  std::string_view body = s;
  bool negative = false;
  if (!body.empty() && (body.front() == '+' || body.front() == '-')) {
    negative = body.front() == '-';
    body.remove_prefix(1);
  }
  if (body.empty() || !((body.front() >= '0' && body.front() <= '9') || body.front() == '.')) {
    throw Error(ErrorKind::UnparsableNumber, "no numeric literal in '" + std::string(s) + "'", std::string(s));
  }
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
  if (ec != std::errc{} || !std::isfinite(value)) {
    throw Error(ErrorKind::UnparsableNumber, "bad numeric literal in '" + std::string(s) + "'", std::string(s));
  }
  std::string_view rest = trim(body.substr(static_cast<std::size_t>(ptr - body.data())));
  return {negative ? -value : value, rest};
}

}  // namespace detail

// Strict: unknown units throw UnknownUnit.
inline Quantity parse_quantity(std::string_view text, const UnitRegistry& registry = default_registry()) {
  auto [value, unit_text] = detail::split_number(text);
  UnitSpec unit = registry.parse_unit(unit_text);
  return Quantity(value * unit.factor, unit.dimension);
}

// Lenient: an unknown unit degrades to a dimensionless value plus a warning.
// A missing number still throws UnparsableNumber.
inline QuantityParse parse_quantity_lenient(std::string_view text,
                                            const UnitRegistry& registry = default_registry()) {
  auto [value, unit_text] = detail::split_number(text);
  QuantityParse out;
  out.unit_text = std::string(unit_text);
  try {
    UnitSpec unit = registry.parse_unit(unit_text);
    out.quantity = Quantity(value * unit.factor, unit.dimension);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::UnknownUnit) throw;
    out.quantity = Quantity(value);
    out.warning = e.what() + std::string(" (treated as dimensionless)");
  }
  return out;
}

// "<exact magnitude> <SI unit>"; parses back to an identical Quantity.
inline std::string render_quantity(const Quantity& q) {
  std::string unit = q.dimension().si_unit();
  std::string out = format_exact(q.magnitude());
  if (!unit.empty()) out += " " + unit;
  return out;
}

// Magnitude expressed in `unit_text`, e.g. 65.016 m**3 in "L" -> 65016.
inline double magnitude_in(const Quantity& q, std::string_view unit_text,
                           const UnitRegistry& registry = default_registry()) {
  UnitSpec unit = registry.parse_unit(unit_text);
  if (unit.dimension != q.dimension()) {
    throw Error(ErrorKind::DimensionMismatch,
                "cannot express " + render_quantity(q) + " in '" + std::string(unit_text) + "'");
  }
  return q.magnitude() / unit.factor;
}

// ---------------------------------------------------------------------------
// Arithmetic

enum class ArithOp { Add, Sub, Mul, Div };
enum class UnitMode { Strict, Lenient };

inline std::string_view to_string(ArithOp op) {
  switch (op) {
    case ArithOp::Add: return "Add";
    case ArithOp::Sub: return "Sub";
    case ArithOp::Mul: return "Mul";
    case ArithOp::Div: return "Div";
  }
  return "?";
}

// Lenient add/sub across dimensions keeps the left dimension and appends a
// message to `warnings` (when given).
inline Quantity quantity_arith(ArithOp op, const Quantity& a, const Quantity& b, UnitMode mode,
                               std::vector<std::string>* warnings = nullptr) {
  auto finite = [](double v, Dimension d) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteValue, "arithmetic overflow");
    return Quantity(v, d);
  };
  switch (op) {
    case ArithOp::Add:
    case ArithOp::Sub: {
      if (a.dimension() != b.dimension()) {
        std::string msg = std::string(to_string(op)) + " of incompatible dimensions [" + a.dimension().si_unit() +
                          "] and [" + b.dimension().si_unit() + "]";
        if (mode == UnitMode::Strict) throw Error(ErrorKind::DimensionMismatch, msg);
        if (warnings) warnings->push_back(msg);
      }
      double v = op == ArithOp::Add ? a.magnitude() + b.magnitude() : a.magnitude() - b.magnitude();
      return finite(v, a.dimension());
    }
    case ArithOp::Mul:
      return finite(a.magnitude() * b.magnitude(), a.dimension() * b.dimension());
    case ArithOp::Div:
      if (b.magnitude() == 0.0) throw Error(ErrorKind::DivisionByZero, "division by zero");
      return finite(a.magnitude() / b.magnitude(), a.dimension() / b.dimension());
  }
  throw Error(ErrorKind::UsageError, "unknown arithmetic operator");
}

}  // namespace fermi
