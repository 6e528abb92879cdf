#pragma once

// Dataset records and their line-delimited JSON file format.
//
// File layout: a header line {"format":"fermi-records","version":1} followed
// by one record object per line:
//   {"id":..., "question":..., "answer_value":65016, "answer_unit":"L",
//    "facts":[{"id":"F1","text":...}], "program":"...", "source":"real"|"synth",
//    "split":"train"|"validation"|"test", "meta":{...}}      (meta: synth only)
// Files without the header line are accepted as long as every line is a record.

#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fermi/error.hpp"
#include "fermi/executor.hpp"
#include "fermi/program.hpp"
#include "fermi/units.hpp"

namespace fermi {

inline constexpr int kRecordsFormatVersion = 1;

enum class Source { Real, Synth };
enum class Split { Train, Validation, Test };

inline std::string_view to_string(Source s) { return s == Source::Real ? "real" : "synth"; }
inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}
inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

struct FactEntry {
  Identifier id;
  std::string text;
  friend bool operator==(const FactEntry&, const FactEntry&) = default;
};

// Provenance of a generated record.
struct SynthMeta {
  int template_id = 0;
  std::vector<std::string> bindings;  // object names in slot order ($x, $y)
  std::optional<int> k;
  bool decomposed = false;
  std::string pivot;  // decomposition pivot object, empty if not decomposed
  std::uint64_t seed = 0;
  friend bool operator==(const SynthMeta&, const SynthMeta&) = default;
};

struct FermiRecord {
  std::string id;
  std::string question;
  double answer_value = 0.0;
  std::string answer_unit;
  std::vector<FactEntry> facts;
  std::string program;
  Source source = Source::Real;
  Split split = Split::Train;
  std::optional<SynthMeta> meta;

  // Load-time diagnostics; not serialized.
  std::vector<std::string> flags;

  Quantity answer(const UnitRegistry& registry = default_registry()) const {
    UnitSpec unit = registry.parse_unit(answer_unit);
    return Quantity(answer_value * unit.factor, unit.dimension);
  }

  FactIdSet fact_ids() const {
    FactIdSet out;
    for (const auto& f : facts) out.insert(f.id);
    return out;
  }

  // The stored program with the fact declarations appended.
  std::string program_with_facts() const {
    std::string out = program;
    for (const auto& f : facts) out += "\n" + f.id.str() + ": " + f.text;
    return out;
  }

  friend bool operator==(const FermiRecord& a, const FermiRecord& b) {
    return a.id == b.id && a.question == b.question && a.answer_value == b.answer_value &&
           a.answer_unit == b.answer_unit && a.facts == b.facts && a.program == b.program &&
           a.source == b.source && a.split == b.split && a.meta == b.meta;
  }
};

inline nlohmann::ordered_json facts_to_json(const std::vector<FactEntry>& facts) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& f : facts) arr.push_back({{"id", f.id.str()}, {"text", f.text}});
  return arr;
}

inline nlohmann::ordered_json to_json(const FermiRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["question"] = r.question;
  j["answer_value"] = r.answer_value;
  j["answer_unit"] = r.answer_unit;
  j["facts"] = facts_to_json(r.facts);
  j["program"] = r.program;
  j["source"] = to_string(r.source);
  j["split"] = to_string(r.split);
  if (r.meta) {
    nlohmann::ordered_json m;
    m["template_id"] = r.meta->template_id;
    m["bindings"] = r.meta->bindings;
    if (r.meta->k) m["k"] = *r.meta->k;
    m["decomposed"] = r.meta->decomposed;
    if (!r.meta->pivot.empty()) m["pivot"] = r.meta->pivot;
    m["seed"] = r.meta->seed;
    j["meta"] = std::move(m);
  }
  return j;
}

namespace detail {

template <typename Json>
std::string require_string(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string())
    throw Error(ErrorKind::SchemaError, where + ": missing string field '" + key + "'", where);
  return j[key].template get<std::string>();
}

inline std::vector<FactEntry> facts_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw Error(ErrorKind::SchemaError, where + ": 'facts' must be an array", where);
  std::vector<FactEntry> out;
  std::set<Identifier> seen;
  for (const auto& f : j) {
    if (!f.is_object()) throw Error(ErrorKind::SchemaError, where + ": fact entries must be objects", where);
    auto id = Identifier::parse(require_string(f, "id", where));
    if (!id || id->kind != IdKind::Fact)
      throw Error(ErrorKind::SchemaError, where + ": bad fact id '" + f["id"].get<std::string>() + "'", where);
    if (!seen.insert(*id).second)
      throw Error(ErrorKind::SchemaError, where + ": duplicate fact id " + id->str(), where);
    out.push_back({*id, require_string(f, "text", where)});
  }
  return out;
}

}  // namespace detail

inline FermiRecord record_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::SchemaError, where + ": record must be an object", where);
  FermiRecord r;
  r.id = detail::require_string(j, "id", where);
  r.question = detail::require_string(j, "question", where);
  if (!j.contains("answer_value") || !j["answer_value"].is_number())
    throw Error(ErrorKind::SchemaError, where + ": missing numeric field 'answer_value'", where);
  r.answer_value = j["answer_value"].get<double>();
  r.answer_unit = j.contains("answer_unit") ? detail::require_string(j, "answer_unit", where) : "";
  r.facts = j.contains("facts") ? detail::facts_from_json(j["facts"], where) : std::vector<FactEntry>{};
  r.program = j.contains("program") ? detail::require_string(j, "program", where) : "";
  auto source = detail::require_string(j, "source", where);
  if (source == "real") r.source = Source::Real;
  else if (source == "synth") r.source = Source::Synth;
  else throw Error(ErrorKind::SchemaError, where + ": bad source '" + source + "'", where);
  auto split = parse_split(detail::require_string(j, "split", where));
  if (!split) throw Error(ErrorKind::SchemaError, where + ": bad split", where);
  r.split = *split;
  if (j.contains("meta")) {
    const auto& m = j["meta"];
    SynthMeta meta;
    try {
      meta.template_id = m.at("template_id").get<int>();
      meta.bindings = m.at("bindings").get<std::vector<std::string>>();
      if (m.contains("k")) meta.k = m["k"].get<int>();
      meta.decomposed = m.at("decomposed").get<bool>();
      if (m.contains("pivot")) meta.pivot = m["pivot"].get<std::string>();
      meta.seed = m.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::SchemaError, where + ": bad meta object (" + e.what() + ")", where);
    }
    r.meta = std::move(meta);
  }

  // Checks that flag rather than reject.
  if (!(r.answer_value > 0)) r.flags.push_back("answer is not positive");
  try {
    (void)r.answer();
  } catch (const Error& e) {
    throw Error(ErrorKind::SchemaError, where + ": bad answer unit (" + e.what() + ")", where);
  }
  if (!r.program.empty()) {
    try {
      Program p = parse_program(r.program);
      FactIdSet known = r.fact_ids();
      for (const auto& id : used_fact_ids(p)) {
        if (known.contains(id)) continue;
        std::string msg = "program cites " + id.str() + ", which is not among the record's facts";
        if (r.source == Source::Synth) throw Error(ErrorKind::SchemaError, where + ": " + msg, where);
        r.flags.push_back(msg);
      }
      auto result = execute(p);
      if (!result.valid()) r.flags.push_back("program is not valid: " + result.error().message);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::SchemaError) throw;
      r.flags.push_back(std::string("program is not valid: ") + e.what());
    }
  }
  return r;
}

inline void write_records(const std::vector<FermiRecord>& records, std::ostream& out) {
  out << nlohmann::ordered_json{{"format", "fermi-records"}, {"version", kRecordsFormatVersion}}.dump() << '\n';
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline void write_records(const std::vector<FermiRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing", path);
  write_records(records, out);
  if (!out) throw Error(ErrorKind::IoError, "failed writing '" + path + "'", path);
}

namespace detail {

// Checks an optional `{"format":..., "version":...}` header. Returns true when
// the line was a header.
inline bool check_header(const nlohmann::json& j, std::string_view format, const std::string& where) {
  if (!j.is_object() || !j.contains("format")) return false;
  if (j["format"] != format)
    throw Error(ErrorKind::SchemaError, where + ": expected format '" + std::string(format) + "'", where);
  if (!j.contains("version") || j["version"] != kRecordsFormatVersion)
    throw Error(ErrorKind::SchemaError, where + ": unsupported format version", where);
  return true;
}

inline nlohmann::json parse_line(const std::string& line, const std::string& where) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::SchemaError, where + ": invalid JSON (" + e.what() + ")", where);
  }
}

}  // namespace detail

inline std::vector<FermiRecord> read_records(std::istream& in, const std::string& name = "<stream>") {
  std::vector<FermiRecord> out;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::string where = name + ":" + std::to_string(line_no);
    auto j = detail::parse_line(line, where);
    if (out.empty() && line_no == 1 && detail::check_header(j, "fermi-records", where)) continue;
    FermiRecord r = record_from_json(j, where);
    if (!ids.insert(r.id).second)
      throw Error(ErrorKind::SchemaError, where + ": duplicate record id '" + r.id + "'", where);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<FermiRecord> read_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'", path);
  return read_records(in, path);
}

}  // namespace fermi
