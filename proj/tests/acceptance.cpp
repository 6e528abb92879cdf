// Acceptance checks; one PASS/FAIL line per criterion.

#include <chrono>
#include <functional>
#include <iostream>

#include "support.hpp"

using namespace fermi;
using namespace testing_support;

namespace {

struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok && failures.size() == 5) failures.push_back("...");
  }
};

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) s.replace(pos, from.size(), to);
  return s;
}

std::vector<std::string> split_programs(const std::string& text) {
  std::vector<std::string> out(1);
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line == "---") out.emplace_back();
    else out.back() += line + "\n";
  }
  return out;
}

std::string q(const fs::path& p) { return shell_quote(p.string()); }

void c1(Check& c) {
  double s = fp_score(100000.0, 85090.0);
  c.expect(std::fabs(s - 0.9766) <= 0.0005, "fp_score(100000, 85090) = " + format_exact(s));
  c.expect(fp_score(100.0, 1.08e15) == 0.0, "fp_score(100, 1.08e15) != 0");
}

void c2(Check& c) {
  auto r = execute_text(water_program());
  c.expect(r.valid(), "water program failed");
  if (r.valid()) {
    c.expect(r.value().dimension() == Dimension::of(BaseDim::Length, 3), "water answer is not a volume");
    c.expect(r.value().magnitude() == 65.016, "water answer " + format_exact(r.value().magnitude()));
    c.expect(describe_answer(r) == "65016 L (65.016 m**3)", "rendered as " + describe_answer(r));
  }
  auto beans = execute_text(split_programs(read_file(data_path("failure_modes.prog"))).at(1));
  c.expect(beans.valid(), "jelly-bean program failed");
  if (beans.valid())
    c.expect(std::fabs(beans.value().magnitude() / 5583.33 - 1) <= 0.01,
             "jelly beans " + format_exact(beans.value().magnitude()));
}

void c3(Check& c) {
  Rng rng(2024);
  for (int i = 0; i < 100; ++i) {
    double a = std::pow(10.0, rng.unit() * 20 - 10);
    for (int k = 0; k <= 4; ++k) {
      double want = std::max(0.0, 1.0 - k / 3.0);
      double got = fp_score(std::pow(10.0, k) * a, a);
      c.expect(std::fabs(got - want) <= 1e-12, "scale law k=" + std::to_string(k) + " A=" + format_exact(a));
    }
  }
  for (int i = 0; i < 10000; ++i) {
    double a = std::pow(10.0, rng.unit() * 30 - 15);
    double b = std::pow(10.0, rng.unit() * 30 - 15);
    double s = fp_score(a, b);
    c.expect(s >= 0 && s <= 1, "bounds for " + format_exact(a) + ", " + format_exact(b));
    c.expect(std::fabs(s - fp_score(b, a)) <= 1e-12, "symmetry for " + format_exact(a) + ", " + format_exact(b));
  }
}

void c4(Check& c, const fs::path& dir) {
  auto r = run_cli("gen --kb " + shell_quote(data_path("sample_kb.txt")) +
                   " --size 1200 --decompose-fraction 0.5 --seed 1 --out " + q(dir / "gen"));
  c.expect(r.code == 0, "gen exited " + std::to_string(r.code) + ": " + r.out);
  if (r.code != 0) return;
  auto recs = read_records((dir / "gen" / "synthfp.jsonl").string());
  c.expect(recs.size() == 1200, "record count " + std::to_string(recs.size()));
  std::map<int, int> per_template;
  int decomposed = 0;
  std::string preds;
  for (const auto& rec : recs) {
    c.expect(rec.flags.empty(), rec.id + " flagged");
    if (!rec.meta) {
      c.expect(false, rec.id + " has no generator metadata");
      continue;
    }
    ++per_template[rec.meta->template_id];
    decomposed += rec.meta->decomposed ? 1 : 0;
    std::string program = rec.program_with_facts();
    c.expect(check_validity(program) == 1, rec.id + " invalid");
    auto ex = execute_text(program);
    c.expect(ex.valid() && ex.value().magnitude() == rec.answer().magnitude(),
             rec.id + " does not execute exactly to its stored answer");
    nlohmann::ordered_json j;
    j["id"] = rec.id;
    j["answer_value"] = rec.answer_value;
    j["answer_unit"] = rec.answer_unit;
    j["program"] = program;
    preds += j.dump() + "\n";
  }
  c.expect(per_template.size() == 12, "templates used: " + std::to_string(per_template.size()));
  for (const auto& [id, n] : per_template) c.expect(n == 100, "template " + std::to_string(id) + ": " + std::to_string(n));
  c.expect(decomposed == 600, "decomposed " + std::to_string(decomposed));

  write_file(dir / "self.jsonl", preds);
  auto s = run_cli("score --task 1 --gold " + q(dir / "gen" / "synthfp.jsonl") + " --pred " + q(dir / "self.jsonl") +
                   " --out " + q(dir / "self_report.txt"));
  c.expect(s.code == 0, "score exited " + std::to_string(s.code));
  auto report = nlohmann::json::parse(read_file(dir / "self_report.txt.json"));
  for (const char* m : {"answer_score", "validity", "pans_score", "fact_f1"})
    c.expect(report["metrics"].contains(m) && format_metric(report["metrics"][m].get<double>()) == "1.00",
             std::string("self-score ") + m);
}

void c5(Check& c, const fs::path& dir) {
  fs::path in = dir / "gen" / "synthfp.jsonl";
  if (!fs::exists(in)) {
    auto g = run_cli("gen --kb " + shell_quote(data_path("sample_kb.txt")) +
                     " --size 1200 --decompose-fraction 0.5 --seed 1 --out " + q(dir / "gen"));
    c.expect(g.code == 0, "gen failed");
    if (g.code != 0) return;
  }
  auto a = run_cli("tasks build --task 2 --in " + q(in) + " --seed 5 --out " + q(dir / "t2a"));
  auto b = run_cli("tasks build --task 2 --in " + q(in) + " --seed 5 --out " + q(dir / "t2b"));
  c.expect(a.code == 0 && b.code == 0, "tasks build failed: " + a.out + b.out);
  if (a.code != 0 || b.code != 0) return;
  c.expect(read_file(dir / "t2a" / "task2.jsonl") == read_file(dir / "t2b" / "task2.jsonl"), "task files differ");
  c.expect(read_file(dir / "t2a" / "task2_key.jsonl") == read_file(dir / "t2b" / "task2_key.jsonl"), "keys differ");

  auto recs = read_records(in.string());
  std::map<std::string, const FermiRecord*> by_id;
  for (const auto& r : recs) by_id[r.id] = &r;
  std::ifstream task_in(dir / "t2a" / "task2.jsonl");
  auto entries = read_task_file(task_in);
  auto key = read_answer_key((dir / "t2a" / "task2_key.jsonl").string());
  c.expect(entries.size() == recs.size(), "instance count");
  for (const auto& e : entries) {
    const FermiRecord& rec = *by_id.at(e.id);
    const auto& k = key.at(e.id);
    if (rec.facts.size() < kDistractorContextSize)
      c.expect(e.facts.size() == kDistractorContextSize, e.id + " has " + std::to_string(e.facts.size()) + " facts");
    std::map<Identifier, std::string> shown;
    for (const auto& f : e.facts) shown[f.id] = f.text;
    FactIdSet mapped;
    for (const auto& f : rec.facts) {
      auto it = k.gold_mapping.find(f.id);
      bool ok = it != k.gold_mapping.end() && shown.contains(it->second) && shown[it->second] == f.text;
      c.expect(ok, e.id + " is missing gold fact " + f.id.str());
      if (ok) mapped.insert(it->second);
    }
    c.expect(fact_f1(mapped, k.gold_fact_ids) == 1.0, e.id + " key does not reproduce gold ids");
  }
}

void c6(Check& c) {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    Program p = random_program(rng);
    std::string text = render_program(p);
    try {
      c.expect(parse_program(text) == p, "canonical round trip #" + std::to_string(i));
      c.expect(render_program(parse_program(text)) == text, "render idempotence #" + std::to_string(i));
      c.expect(parse_program(messy_render(p, rng)) == p, "messy round trip #" + std::to_string(i));
    } catch (const Error& e) {
      c.expect(false, "random program #" + std::to_string(i) + ": " + e.what());
    }
  }
  std::vector<std::string> examples = split_programs(read_file(data_path("failure_modes.prog")));
  examples.push_back(water_program());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    Program p = parse_program(examples[i]);
    std::string canon = render_program(p);
    c.expect(parse_program(canon) == p, "example " + std::to_string(i));
    std::string bar = replace_all(canon, " because ", " | ");
    c.expect(parse_program(bar) == p, "example " + std::to_string(i) + " with '|'");
    std::string root = replace_all(canon, "Q0 -> ", "P: ");
    c.expect(root != canon && parse_program(root) == p, "example " + std::to_string(i) + " with 'P:'");
    c.expect(parse_program(replace_all(root, "P: ", "P -> ")) == p, "example " + std::to_string(i) + " with 'P ->'");
  }
}

void c7(Check& c) {
  Rng rng(77);
  std::vector<double> golds;
  for (int i = 0; i < 300; ++i) golds.push_back(std::pow(10.0, -2 + 10 * rng.unit()));
  auto r = constant_sweep(golds, 10);
  double brute = 0;
  const int dense = 10000;
  for (int i = -10 * dense; i <= 10 * dense; ++i) {
    double cst = std::pow(10.0, double(i) / dense);
    double s = 0;
    for (double g : golds) s += fp_score(cst, g);
    brute = std::max(brute, s / double(golds.size()));
  }
  c.expect(std::fabs(r.best_score - brute) <= 0.001,
           "sweep " + format_exact(r.best_score) + " vs brute force " + format_exact(brute));
}

void c8(Check& c) {
  FermiRecord gold;
  gold.id = "g";
  gold.question = "q";
  gold.answer_value = 10;
  gold.program = "Q0 -> A1 because F1\nA1: 10";
  gold.facts = {{Identifier::fact(1), "ten"}};
  const std::vector<std::pair<std::string, ErrorKind>> cases = {
      {"Q0 -> Mul(Q1, 2)\nQ1 -> Add(Q0, 1)", ErrorKind::CyclicDependency},
      {"Q0 -> Mul(Q1, Q2)\nQ1 -> A1 because F1\nA1: 10", ErrorKind::UndefinedReference},
      {"Q0 -> Div(Q1, Q2)\nQ1 -> A1 because F1\nQ2 -> Sub(Q1, Q1)\nA1: 10", ErrorKind::DivisionByZero},
      {"Q0 -> Pow(Q1, 2)\nQ1 -> A1 because F1\nA1: 10", ErrorKind::SyntaxError},
  };
  for (const auto& [text, kind] : cases) {
    std::string name(to_string(kind));
    c.expect(check_validity(text) == 0, name + ": validity is not 0");
    auto r = execute_text(text);
    c.expect(!r.valid() && r.error().kind == kind, name + ": wrong error kind");
    auto s = score_prediction({std::nullopt, text}, gold, gold.fact_ids());
    c.expect(s.validity == 0 && s.pans_score == 0.0 && s.outcome == name, name + ": credit not 0");
  }
}

}  // namespace

int main() {
  TempDir tmp;
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria = {
      {"metric anchor", c1},
      {"executor anchor", c2},
      {"scale-law properties", c3},
      {"generator self-consistency", [&](Check& c) { c4(c, tmp.path); }},
      {"distractor task construction", [&](Check& c) { c5(c, tmp.path); }},
      {"parser round trip", c6},
      {"constant baseline sweep", c7},
      {"error taxonomy", c8},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool ok = c.failures.empty();
    failed += ok ? 0 : 1;
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " ("
              << format_significant(secs, 3) << " s)\n";
    for (const auto& f : c.failures) std::cout << "    " << f << "\n";
  }
  std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
