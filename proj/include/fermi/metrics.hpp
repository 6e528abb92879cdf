#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fermi/error.hpp"
#include "fermi/executor.hpp"
#include "fermi/program.hpp"
#include "fermi/record.hpp"
#include "fermi/units.hpp"

namespace fermi {

// max{0, 1 - |log10(predicted / gold)| / 3}: full credit for the exact
// answer, one third less per order of magnitude, zero from three orders off.
inline double fp_score(double predicted, double gold) {
  if (!(gold > 0) || !std::isfinite(gold))
    throw Error(ErrorKind::InvalidGold, "gold answer must be positive, got " + format_exact(gold));
  if (!(predicted > 0) || !std::isfinite(predicted)) return 0.0;
  double orders = std::fabs(std::log10(predicted) - std::log10(gold));
  return std::max(0.0, 1.0 - orders / 3.0);
}

// Scores SI magnitudes. A dimension mismatch is scored anyway and reported
// through `warnings`.
inline double fp_score(const Quantity& predicted, const Quantity& gold, std::vector<std::string>* warnings = nullptr) {
  if (warnings && predicted.dimension() != gold.dimension()) {
    warnings->push_back("predicted dimension [" + predicted.dimension().si_unit() + "] differs from gold [" +
                        gold.dimension().si_unit() + "]");
  }
  return fp_score(predicted.magnitude(), gold.magnitude());
}

// F1 between cited and gold fact ids. Both empty counts as a perfect match.
inline double fact_f1(const FactIdSet& used, const FactIdSet& gold) {
  if (used.empty() && gold.empty()) return 1.0;
  if (used.empty() || gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& id : used) hits += gold.contains(id) ? 1 : 0;
  if (hits == 0) return 0.0;
  double precision = static_cast<double>(hits) / static_cast<double>(used.size());
  double recall = static_cast<double>(hits) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

struct Prediction {
  std::optional<Quantity> answer;
  std::optional<std::string> program;
};

struct QuestionScore {
  double answer_score = 0.0;
  int validity = 0;
  double pans_score = 0.0;
  std::optional<double> fact_f1;  // only when gold facts were in the task input

  // "ok", an ErrorKind name, "no_program" or "no_prediction".
  std::string outcome = "ok";
  std::vector<std::string> notes;
};

// Scores one prediction against its gold record. `gold_fact_ids` is set for
// tasks whose input carried the gold facts; it enables fact F1 and lets the
// program cite those ids without declaring them.
inline QuestionScore score_prediction(const Prediction& pred, const FermiRecord& gold,
                                      const std::optional<FactIdSet>& gold_fact_ids) {
  QuestionScore score;
  Quantity gold_answer = gold.answer();
  if (!pred.answer && !pred.program) {
    score.outcome = "no_prediction";
    if (gold_fact_ids) score.fact_f1 = fact_f1({}, *gold_fact_ids);
    return score;
  }
  if (pred.answer) score.answer_score = fp_score(*pred.answer, gold_answer, &score.notes);

  FactIdSet used;
  if (pred.program) {
    ExecOptions options;
    if (gold_fact_ids) options.known_facts = *gold_fact_ids;
    try {
      Program program = parse_program(*pred.program);
      used = used_fact_ids(program);
      ExecutionResult result = execute(program, options);
      if (result.valid()) {
        score.validity = 1;
        score.pans_score = fp_score(result.value(), gold_answer, &score.notes);
      } else {
        score.outcome = std::string(to_string(result.error().kind));
        score.notes.push_back(result.error().message);
      }
    } catch (const Error& e) {
      score.outcome = std::string(to_string(e.kind()));
      score.notes.push_back(e.what());
    }
  } else {
    score.outcome = "no_program";
  }
  if (gold_fact_ids) score.fact_f1 = fact_f1(used, *gold_fact_ids);
  return score;
}

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateReport {
  std::string split;
  std::size_t count = 0;
  double answer_score = 0.0;
  double validity = 0.0;
  double pans_score = 0.0;
  std::optional<double> fact_f1;  // mean over scores that carry one
  std::size_t fact_f1_count = 0;
  std::map<std::string, std::size_t> outcomes;  // sums to count
};

inline AggregateReport aggregate(const std::vector<QuestionScore>& scores, std::string split = "all") {
  if (scores.empty()) throw Error(ErrorKind::EmptyInput, "no scores to aggregate");
  AggregateReport r;
  r.split = std::move(split);
  r.count = scores.size();
  double f1_sum = 0.0;
  for (const auto& s : scores) {
    r.answer_score += s.answer_score;
    r.validity += s.validity;
    r.pans_score += s.pans_score;
    if (s.fact_f1) {
      f1_sum += *s.fact_f1;
      ++r.fact_f1_count;
    }
    ++r.outcomes[s.outcome];
  }
  auto n = static_cast<double>(r.count);
  r.answer_score /= n;
  r.validity /= n;
  r.pans_score /= n;
  if (r.fact_f1_count > 0) r.fact_f1 = f1_sum / static_cast<double>(r.fact_f1_count);
  return r;
}

inline std::string format_metric(double v) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.2f", v);
  return buf.data();
}

// Text report: a header line, then `metric split value count` per metric
// (values at 2 decimals), then `outcome:<name> split - count` lines.
inline void write_report_text(const AggregateReport& r, std::ostream& out) {
  out << "# fermi-report v1\n";
  auto line = [&](const char* name, double v, std::size_t n) {
    out << name << ' ' << r.split << ' ' << format_metric(v) << ' ' << n << '\n';
  };
  line("answer_score", r.answer_score, r.count);
  line("validity", r.validity, r.count);
  line("pans_score", r.pans_score, r.count);
  if (r.fact_f1) line("fact_f1", *r.fact_f1, r.fact_f1_count);
  for (const auto& [name, n] : r.outcomes) out << "outcome:" << name << ' ' << r.split << " - " << n << '\n';
}

// JSON report; full-precision means.
inline nlohmann::ordered_json report_to_json(const AggregateReport& r) {
  nlohmann::ordered_json j;
  j["format"] = "fermi-report";
  j["version"] = 1;
  j["split"] = r.split;
  j["count"] = r.count;
  nlohmann::ordered_json metrics;
  metrics["answer_score"] = r.answer_score;
  metrics["validity"] = r.validity;
  metrics["pans_score"] = r.pans_score;
  if (r.fact_f1) metrics["fact_f1"] = *r.fact_f1;
  j["metrics"] = metrics;
  if (r.fact_f1) j["fact_f1_count"] = r.fact_f1_count;
  j["outcomes"] = r.outcomes;
  return j;
}

// ---------------------------------------------------------------------------
// Prediction files: one {id, answer_value?, answer_unit?, program?} object per
// line, in any order, optionally behind a {"format":"fermi-predictions"} header.

struct PredictionLine {
  std::string id;
  Prediction prediction;
  std::vector<std::string> notes;  // e.g. an answer unit that was not recognized
};

inline std::vector<PredictionLine> read_predictions(std::istream& in, const std::string& name = "<stream>",
                                                    const UnitRegistry& registry = default_registry()) {
  std::vector<PredictionLine> out;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::string where = name + ":" + std::to_string(line_no);
    auto j = detail::parse_line(line, where);
    if (line_no == 1 && detail::check_header(j, "fermi-predictions", where)) continue;
    if (!j.is_object()) throw Error(ErrorKind::SchemaError, where + ": prediction must be an object", where);
    PredictionLine p;
    p.id = detail::require_string(j, "id", where);
    if (j.contains("answer_value") && !j["answer_value"].is_null()) {
      if (!j["answer_value"].is_number())
        throw Error(ErrorKind::SchemaError, where + ": 'answer_value' must be a number", where);
      std::string unit = j.contains("answer_unit") ? detail::require_string(j, "answer_unit", where) : "";
      auto parsed = parse_quantity_lenient(format_exact(j["answer_value"].get<double>()) + " " + unit, registry);
      if (parsed.warning) p.notes.push_back(*parsed.warning);
      p.prediction.answer = parsed.quantity;
    }
    if (j.contains("program") && !j["program"].is_null()) p.prediction.program = detail::require_string(j, "program", where);
    if (!p.prediction.answer && !p.prediction.program)
      throw Error(ErrorKind::SchemaError, where + ": prediction has neither an answer nor a program", where);
    if (!ids.insert(p.id).second)
      throw Error(ErrorKind::SchemaError, where + ": duplicate prediction id '" + p.id + "'", where);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace fermi
