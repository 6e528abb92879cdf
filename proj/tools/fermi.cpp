// fermi: command-line front end for the Fermi problem toolkit.
//
// Exit codes: 0 success, 1 validation failures, 2 usage error, 3 I/O error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fermi/fermi.hpp"

namespace fs = std::filesystem;
using fermi::Error;
using fermi::ErrorKind;

namespace {

enum Exit { kOk = 0, kInvalid = 1, kUsage = 2, kIo = 3 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IoError: return kIo;
    case ErrorKind::UsageError: return kUsage;
    default: return kInvalid;
  }
}

// Errors collected for --errors-json.
struct ErrorLog {
  nlohmann::ordered_json items = nlohmann::ordered_json::array();

  void add(std::string_view kind, const std::string& location, const std::string& message) {
    items.push_back({{"kind", kind}, {"location", location}, {"message", message}});
  }
  void add(const Error& e) { add(fermi::to_string(e.kind()), e.location(), e.what()); }
};

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'", path);
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "' for writing", path.string());
  return out;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create '" + dir.string() + "': " + ec.message(), dir.string());
}

fermi::UnitRegistry load_registry(const std::string& extension) {
  fermi::UnitRegistry reg = fermi::UnitRegistry::builtin();
  if (!extension.empty()) {
    auto in = open_in(extension);
    reg.load_extension(in);
  }
  return reg;
}

// Programs in one file are separated by lines holding only "---".
std::vector<std::string> split_programs(std::istream& in) {
  std::vector<std::string> out(1);
  std::string line;
  while (std::getline(in, line)) {
    if (fermi::trim(line) == "---") {
      out.emplace_back();
      continue;
    }
    out.back() += line + "\n";
  }
  std::erase_if(out, [](const std::string& p) { return fermi::trim(p).empty(); });
  return out;
}

std::vector<fermi::FermiRecord> records_in_split(std::vector<fermi::FermiRecord> records, const std::string& split) {
  if (split.empty() || split == "all") return records;
  auto s = fermi::parse_split(split);
  if (!s) throw Error(ErrorKind::UsageError, "unknown split '" + split + "'");
  std::erase_if(records, [&](const fermi::FermiRecord& r) { return r.split != *s; });
  return records;
}

// ---------------------------------------------------------------------------

struct ProgramArgs {
  std::vector<std::string> files;
  std::string file;
  bool strict = false;
  bool trace = false;
  std::string units;
};

int cmd_program_check(const ProgramArgs& a, ErrorLog& log) {
  fermi::UnitRegistry reg = load_registry(a.units);
  fermi::ExecOptions opts;
  opts.registry = &reg;
  opts.mode = a.strict ? fermi::UnitMode::Strict : fermi::UnitMode::Lenient;
  int invalid = 0, total = 0;
  for (const auto& path : a.files) {
    auto in = open_in(path);
    auto programs = split_programs(in);
    if (programs.empty()) {
      std::cout << path << ": no programs\n";
      log.add("EmptyInput", path, "no programs in file");
      ++invalid;
    }
    for (std::size_t i = 0; i < programs.size(); ++i) {
      ++total;
      std::string where = path + "#" + std::to_string(i + 1);
      auto result = fermi::execute_text(programs[i], opts);
      if (result.valid()) {
        std::cout << where << ": valid\n";
        continue;
      }
      ++invalid;
      const auto& err = result.error();
      std::cout << where << ": invalid " << fermi::to_string(err.kind) << ": " << err.message << "\n";
      log.add(fermi::to_string(err.kind), where + (err.location.empty() ? "" : ":" + err.location), err.message);
    }
  }
  std::cout << (total - invalid) << "/" << total << " programs valid\n";
  return invalid == 0 ? kOk : kInvalid;
}

int cmd_program_exec(const ProgramArgs& a, ErrorLog& log) {
  fermi::UnitRegistry reg = load_registry(a.units);
  fermi::ExecOptions opts;
  opts.registry = &reg;
  opts.mode = a.strict ? fermi::UnitMode::Strict : fermi::UnitMode::Lenient;
  auto in = open_in(a.file);
  std::stringstream text;
  text << in.rdbuf();
  auto result = fermi::execute_text(text.str(), opts);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  if (a.trace) {
    for (const auto& [q, v] : result.trace) std::cout << q.str() << " = " << fermi::render_quantity(v) << "\n";
  }
  if (!result.valid()) {
    const auto& err = result.error();
    std::cerr << "error: " << fermi::to_string(err.kind) << ": " << err.message << "\n";
    log.add(fermi::to_string(err.kind), a.file + (err.location.empty() ? "" : ":" + err.location), err.message);
    return kInvalid;
  }
  std::cout << fermi::describe_answer(result, reg) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct ScoreArgs {
  int task = 0;
  std::string gold, pred, out, key, split;
  bool per_question = false;
  unsigned jobs = fermi::default_jobs();
};

int cmd_score(const ScoreArgs& a, ErrorLog& log) {
  auto task = fermi::task_from_number(a.task);
  if (!task) throw Error(ErrorKind::UsageError, "--task must be 1, 2 or 3");
  if (*task == fermi::TaskKind::DistractorContext && a.key.empty())
    throw Error(ErrorKind::UsageError, "--key (the task-2 answer key) is required for --task 2");

  auto gold = records_in_split(fermi::read_records(a.gold), a.split);
  if (gold.empty()) throw Error(ErrorKind::EmptyInput, "no gold records to score", a.gold);
  std::sort(gold.begin(), gold.end(), [](const auto& x, const auto& y) { return x.id < y.id; });

  std::map<std::string, fermi::AnswerKeyEntry> key;
  if (!a.key.empty()) {
    auto in = open_in(a.key);
    key = fermi::read_answer_key(in, a.key);
  }
  std::map<std::string, fermi::PredictionLine> preds;
  {
    auto in = open_in(a.pred);
    for (auto& p : fermi::read_predictions(in, a.pred)) preds.emplace(p.id, std::move(p));
  }

  int problems = 0;
  std::set<std::string> gold_ids;
  for (const auto& r : gold) gold_ids.insert(r.id);
  for (const auto& [id, _] : preds) {
    if (gold_ids.contains(id)) continue;
    // Predictions for records outside the selected split are expected.
    if (!a.split.empty() && a.split != "all") continue;
    std::cerr << "warning: prediction '" << id << "' has no gold record\n";
    log.add("UnknownId", a.pred, "prediction '" + id + "' has no gold record");
    ++problems;
  }

  std::vector<fermi::QuestionScore> scores(gold.size());
  std::vector<std::string> missing_key(gold.size());
  fermi::parallel_for(gold.size(), a.jobs, [&](std::size_t i) {
    const auto& rec = gold[i];
    std::optional<fermi::FactIdSet> gold_facts;
    if (*task == fermi::TaskKind::PerfectContext) {
      gold_facts = rec.fact_ids();
    } else if (*task == fermi::TaskKind::DistractorContext) {
      auto it = key.find(rec.id);
      if (it == key.end()) missing_key[i] = rec.id;
      else gold_facts = it->second.gold_fact_ids;
    }
    auto p = preds.find(rec.id);
    fermi::Prediction pred = p == preds.end() ? fermi::Prediction{} : p->second.prediction;
    scores[i] = fermi::score_prediction(pred, rec, gold_facts);
    if (p != preds.end())
      scores[i].notes.insert(scores[i].notes.end(), p->second.notes.begin(), p->second.notes.end());
  });
  for (const auto& id : missing_key) {
    if (id.empty()) continue;
    std::cerr << "warning: record '" << id << "' is missing from the answer key\n";
    log.add("UnknownId", a.key, "record '" + id + "' is missing from the answer key");
    ++problems;
  }

  auto report = fermi::aggregate(scores, a.split.empty() ? "all" : a.split);
  fs::path out_path(a.out);
  if (out_path.has_parent_path()) make_dir(out_path.parent_path());
  {
    auto out = open_out(out_path);
    fermi::write_report_text(report, out);
  }
  {
    auto out = open_out(out_path.string() + ".json");
    out << fermi::report_to_json(report).dump(2) << "\n";
  }
  if (a.per_question) {
    auto out = open_out(out_path.string() + ".questions.jsonl");
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const auto& s = scores[i];
      nlohmann::ordered_json j;
      j["id"] = gold[i].id;
      j["answer_score"] = s.answer_score;
      j["validity"] = s.validity;
      j["pans_score"] = s.pans_score;
      j["fact_f1"] = s.fact_f1 ? nlohmann::ordered_json(*s.fact_f1) : nlohmann::ordered_json(nullptr);
      j["outcome"] = s.outcome;
      j["notes"] = s.notes;
      out << j.dump() << "\n";
    }
  }
  fermi::write_report_text(report, std::cout);
  return problems == 0 ? kOk : kInvalid;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string kb, out;
  std::size_t size = 0;
  double fraction = 0.5;
  std::uint64_t seed = 0;
  unsigned jobs = fermi::default_jobs();
};

int cmd_gen(GenArgs a) {
  if (a.kb.empty()) {
    if (const char* env = std::getenv("FERMI_KB_PATH")) a.kb = env;
  }
  if (a.kb.empty()) throw Error(ErrorKind::UsageError, "no knowledge base: pass --kb or set FERMI_KB_PATH");
  auto kb = fermi::load_kb(a.kb);
  fermi::GenerationConfig config{a.size, a.fraction, a.seed, a.jobs};
  auto ds = fermi::generate_dataset(kb, config);

  std::vector<fermi::FermiRecord> all;
  std::map<fermi::Split, std::vector<fermi::FermiRecord>> by_split;
  for (const auto& g : ds.records) {
    all.push_back(g.record);
    by_split[g.record.split].push_back(g.record);
  }
  fs::path dir(a.out);
  make_dir(dir);
  fermi::write_records(all, (dir / "synthfp.jsonl").string());
  for (auto s : {fermi::Split::Train, fermi::Split::Validation, fermi::Split::Test})
    fermi::write_records(by_split[s], (dir / (std::string(fermi::to_string(s)) + ".jsonl")).string());
  {
    auto out = open_out(dir / "manifest.json");
    out << fermi::generation_manifest(ds, config, kb).dump(2) << "\n";
  }
  std::cout << "generated " << ds.records.size() << " records (" << ds.decomposed << " decomposed) into "
            << dir.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct TasksArgs {
  int task = 0;
  std::string in, out, vectors;
  std::uint64_t seed = 0;
  unsigned jobs = fermi::default_jobs();
};

int cmd_tasks_build(const TasksArgs& a) {
  auto task = fermi::task_from_number(a.task);
  if (!task) throw Error(ErrorKind::UsageError, "--task must be 1, 2 or 3");
  auto records = fermi::read_records(a.in);
  std::unique_ptr<fermi::QuestionSimilarity> sim;
  if (!a.vectors.empty()) {
    auto in = open_in(a.vectors);
    sim = std::make_unique<fermi::VectorSimilarity>(fermi::read_question_vectors(in, records, a.vectors));
  } else if (*task == fermi::TaskKind::DistractorContext) {
    sim = std::make_unique<fermi::TfidfSimilarity>(fermi::questions_of(records));
  }
  auto instances = fermi::build_task(records, *task, sim.get(), a.seed, a.jobs);

  fs::path dir(a.out);
  make_dir(dir);
  std::string stem = "task" + std::to_string(a.task);
  {
    auto out = open_out(dir / (stem + ".jsonl"));
    fermi::write_task_file(instances, *task, out);
  }
  {
    auto out = open_out(dir / (stem + "_key.jsonl"));
    fermi::write_answer_key(instances, *task, out);
  }
  std::size_t over = 0;
  for (const auto& inst : instances) over += inst.over_limit ? 1 : 0;
  std::cout << "built " << instances.size() << " " << fermi::to_string(*task) << " instances into "
            << dir.string() << "\n";
  if (over > 0) std::cout << over << " instances have more gold facts than the context size\n";
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_kb_validate(const std::string& path, const std::string& units, ErrorLog& log) {
  fermi::UnitRegistry reg = load_registry(units);
  auto in = open_in(path);
  std::vector<fermi::KbDiagnostic> diagnostics;
  auto kb = fermi::parse_kb(in, diagnostics, reg);
  for (const auto& d : diagnostics) {
    std::cout << fermi::format_diagnostic(d, path) << "\n";
    log.add(fermi::to_string(d.kind), path + ":" + std::to_string(d.line), d.message);
  }
  std::cout << kb.size() << " objects, " << kb.value_count() << " values, " << diagnostics.size()
            << " diagnostics\n";
  for (auto attr : fermi::kAllAttributes)
    std::cout << "  " << fermi::to_string(attr) << ": " << kb.objects_having(attr).size() << "\n";
  return diagnostics.empty() ? kOk : kInvalid;
}

int cmd_baseline_constant(const std::string& gold_path, int ppd, const std::string& split) {
  auto gold = records_in_split(fermi::read_records(gold_path), split);
  std::vector<double> answers;
  for (const auto& r : gold) answers.push_back(r.answer().magnitude());
  auto result = fermi::constant_sweep(answers, ppd);
  std::cout << "# constant mean_score\n";
  for (const auto& p : result.grid)
    std::cout << fermi::format_significant(p.constant, 6) << " " << fermi::format_significant(p.mean_score, 6)
              << "\n";
  std::cout << "best " << fermi::format_significant(result.best_constant, 6) << " "
            << fermi::format_metric(result.best_score) << " over " << answers.size() << " answers\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fermi problem toolkit: programs, scoring, synthetic data and task views"};
  app.require_subcommand(1);
  std::string errors_json;
  app.add_option("--errors-json", errors_json, "Write the errors encountered to this file as JSON");

  ProgramArgs prog;
  auto* program = app.add_subcommand("program", "Check or execute explanation programs");
  program->require_subcommand(1);
  auto* check = program->add_subcommand("check", "Report validity of each program; exit 0 iff all are valid");
  check->add_option("files", prog.files, "Program files (several programs per file separated by '---')")->required();
  check->add_flag("--strict-units", prog.strict, "Fail on unknown units and mismatched dimensions");
  check->add_option("--units", prog.units, "Unit registry extension file");
  auto* exec = program->add_subcommand("exec", "Execute a program and print its answer");
  exec->add_option("file", prog.file, "Program file")->required();
  exec->add_flag("--strict-units", prog.strict, "Fail on unknown units and mismatched dimensions");
  exec->add_flag("--trace", prog.trace, "Print every sub-question value");
  exec->add_option("--units", prog.units, "Unit registry extension file");

  ScoreArgs score;
  auto* sc = app.add_subcommand("score", "Score a prediction file against gold records");
  sc->add_option("--task", score.task, "Task number")->required()->check(CLI::Range(1, 3));
  sc->add_option("--gold", score.gold, "Gold records file")->required();
  sc->add_option("--pred", score.pred, "Prediction file")->required();
  sc->add_option("--out", score.out, "Report path; JSON goes to <out>.json")->required();
  sc->add_option("--key", score.key, "Answer-key file (task 2)");
  sc->add_option("--split", score.split, "Score only this split (train, validation, test)");
  sc->add_flag("--per-question", score.per_question, "Also write <out>.questions.jsonl");
  sc->add_option("--jobs", score.jobs, "Worker threads")->check(CLI::PositiveNumber);

  GenArgs gen;
  auto* gn = app.add_subcommand("gen", "Generate a synthetic dataset from a knowledge base");
  gn->add_option("--kb", gen.kb, "Knowledge base file (default: $FERMI_KB_PATH)");
  gn->add_option("--size", gen.size, "Number of records")->required();
  gn->add_option("--decompose-fraction", gen.fraction, "Share of records to decompose")->check(CLI::Range(0.0, 1.0));
  gn->add_option("--seed", gen.seed, "Random seed")->required();
  gn->add_option("--out", gen.out, "Output directory")->required();
  gn->add_option("--jobs", gen.jobs, "Worker threads")->check(CLI::PositiveNumber);

  TasksArgs tasks;
  auto* tk = app.add_subcommand("tasks", "Build challenge task views");
  tk->require_subcommand(1);
  auto* build = tk->add_subcommand("build", "Write a task file and its answer key");
  build->add_option("--task", tasks.task, "Task number")->required()->check(CLI::Range(1, 3));
  build->add_option("--in", tasks.in, "Records file")->required();
  build->add_option("--seed", tasks.seed, "Random seed")->required();
  build->add_option("--out", tasks.out, "Output directory")->required();
  build->add_option("--vectors", tasks.vectors, "Per-question vectors (JSONL {id, vector}) for similarity");
  build->add_option("--jobs", tasks.jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::string kb_file, kb_units;
  auto* kbc = app.add_subcommand("kb", "Knowledge base tools");
  kbc->require_subcommand(1);
  auto* validate = kbc->add_subcommand("validate", "Check a knowledge base file");
  validate->add_option("file", kb_file, "Knowledge base file")->required();
  validate->add_option("--units", kb_units, "Unit registry extension file");

  std::string base_gold, base_split;
  int ppd = fermi::kDefaultPointsPerDecade;
  auto* base = app.add_subcommand("baseline", "Answer-only baselines");
  base->require_subcommand(1);
  auto* constant = base->add_subcommand("constant", "Sweep a constant prediction over 1e-10..1e10");
  constant->add_option("--gold", base_gold, "Gold records file")->required();
  constant->add_option("--points-per-decade", ppd, "Grid density")->check(CLI::PositiveNumber);
  constant->add_option("--split", base_split, "Use only this split");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  ErrorLog log;
  int rc = kOk;
  try {
    if (check->parsed()) rc = cmd_program_check(prog, log);
    else if (exec->parsed()) rc = cmd_program_exec(prog, log);
    else if (sc->parsed()) rc = cmd_score(score, log);
    else if (gn->parsed()) rc = cmd_gen(gen);
    else if (build->parsed()) rc = cmd_tasks_build(tasks);
    else if (validate->parsed()) rc = cmd_kb_validate(kb_file, kb_units, log);
    else if (constant->parsed()) rc = cmd_baseline_constant(base_gold, ppd, base_split);
  } catch (const Error& e) {
    std::cerr << "error: " << fermi::to_string(e.kind()) << ": " << e.what() << "\n";
    log.add(e);
    rc = exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    log.add("Internal", "", e.what());
    rc = kInvalid;
  }

  if (!errors_json.empty()) {
    std::ofstream out(errors_json, std::ios::binary);
    if (!out) {
      std::cerr << "error: cannot write '" << errors_json << "'\n";
      return kIo;
    }
    out << log.items.dump(2) << "\n";
  }
  return rc;
}
