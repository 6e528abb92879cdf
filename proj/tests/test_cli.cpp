#include <gtest/gtest.h>

#include "support.hpp"

using namespace fermi;
using namespace testing_support;

namespace {

std::string q(const fs::path& p) { return shell_quote(p.string()); }

// Predictions that restate each gold record exactly.
std::string self_predictions(const std::vector<FermiRecord>& recs,
                             const std::map<std::string, AnswerKeyEntry>* key = nullptr) {
  std::string out;
  for (const auto& r : recs) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["answer_value"] = r.answer_value;
    j["answer_unit"] = r.answer_unit;
    std::string program = r.program_with_facts();
    if (key) program = render_program(remap_fact_ids(parse_program(program), key->at(r.id).gold_mapping));
    j["program"] = program;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<std::string> dir_listing(const fs::path& d) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(d)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

TEST(Cli, ProgramExecWater) {
  auto r = run_cli("program exec " + shell_quote(data_path("water.prog")));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out, "65016 L (65.016 m**3)\n");
  auto t = run_cli("program exec --trace " + shell_quote(data_path("water.prog")));
  EXPECT_EQ(t.code, 0);
  EXPECT_NE(t.out.find("Q0 = "), std::string::npos);
  EXPECT_NE(t.out.find("Q3 = "), std::string::npos);
}

TEST(Cli, ProgramCheck) {
  auto r = run_cli("program check " + shell_quote(data_path("water.prog")) + " " +
                   shell_quote(data_path("failure_modes.prog")));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("4/4 programs valid"), std::string::npos) << r.out;

  TempDir tmp;
  write_file(tmp / "bad.prog", "Q0 -> Mul(Q1, Q2)\nQ1 -> A1 because F1\nA1: 3\n---\nQ0 -> A1 because F1\nA1: 2\n");
  auto bad = run_cli("program check " + q(tmp / "bad.prog"));
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("#1: invalid UndefinedReference"), std::string::npos) << bad.out;
  EXPECT_NE(bad.out.find("#2: valid"), std::string::npos);
  EXPECT_NE(bad.out.find("1/2 programs valid"), std::string::npos);
}

TEST(Cli, ExecFailureAndErrorsJson) {
  TempDir tmp;
  write_file(tmp / "cyc.prog", "Q0 -> Mul(Q1, Q1)\nQ1 -> Add(Q0, 1)\n");
  auto r = run_cli("--errors-json " + q(tmp / "e.json") + " program exec " + q(tmp / "cyc.prog"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("CyclicDependency"), std::string::npos) << r.out;
  auto j = nlohmann::json::parse(read_file(tmp / "e.json"));
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["kind"], "CyclicDependency");
  EXPECT_TRUE(j[0].contains("location"));
  EXPECT_TRUE(j[0].contains("message"));
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("frobnicate").code, 2);
  EXPECT_EQ(run_cli("gen --size 12 --out /tmp/never-written").code, 2);  // --seed missing
  EXPECT_EQ(run_cli("program exec /nonexistent/x.prog").code, 3);
  EXPECT_EQ(run_cli("kb validate /nonexistent/kb.txt").code, 3);
  EXPECT_EQ(run_cli("score --task 4 --gold a --pred b --out c").code, 2);
  EXPECT_EQ(run_cli("--help").code, 0);
}

TEST(Cli, StrictUnits) {
  TempDir tmp;
  write_file(tmp / "u.prog", "Q0 -> Add(Q1, Q2)\nQ1 -> A1 because F1\nQ2 -> A2 because F2\nA1: 3 m\nA2: 2 kg\n");
  EXPECT_EQ(run_cli("program exec " + q(tmp / "u.prog")).code, 0);
  auto strict = run_cli("program exec --strict-units " + q(tmp / "u.prog"));
  EXPECT_EQ(strict.code, 1);
  EXPECT_NE(strict.out.find("DimensionMismatch"), std::string::npos) << strict.out;
  write_file(tmp / "f.prog", "Q0 -> A1 because F1\nA1: 2 furlong\n");
  EXPECT_EQ(run_cli("program exec --strict-units " + q(tmp / "f.prog")).code, 1);
  auto ext = run_cli("program exec --strict-units --units " + shell_quote(data_path("extra_units.txt")) + " " +
                     q(tmp / "f.prog"));
  EXPECT_EQ(ext.code, 0) << ext.out;
  EXPECT_NE(ext.out.find("402.336"), std::string::npos) << ext.out;
}

TEST(Cli, ScoreSelfTask3) {
  TempDir tmp;
  auto recs = read_records(data_path("realfp_sample.jsonl"));
  write_file(tmp / "pred.jsonl", self_predictions(recs));
  auto r = run_cli("score --task 3 --gold " + shell_quote(data_path("realfp_sample.jsonl")) + " --pred " +
                   q(tmp / "pred.jsonl") + " --out " + q(tmp / "rep" / "report.txt") + " --per-question");
  EXPECT_EQ(r.code, 0) << r.out;
  std::string report = read_file(tmp / "rep" / "report.txt");
  EXPECT_NE(report.find("answer_score all 1.00 3"), std::string::npos) << report;
  EXPECT_NE(report.find("validity all 1.00 3"), std::string::npos);
  EXPECT_EQ(report.find("fact_f1"), std::string::npos);
  auto j = nlohmann::json::parse(read_file(tmp / "rep" / "report.txt.json"));
  EXPECT_EQ(j["count"], 3);
  std::string per = read_file(tmp / "rep" / "report.txt.questions.jsonl");
  EXPECT_EQ(std::count(per.begin(), per.end(), '\n'), 3);

  auto split = run_cli("score --task 3 --split test --gold " + shell_quote(data_path("realfp_sample.jsonl")) +
                       " --pred " + q(tmp / "pred.jsonl") + " --out " + q(tmp / "split.txt"));
  EXPECT_EQ(split.code, 0) << split.out;
  EXPECT_NE(read_file(tmp / "split.txt").find("answer_score test 1.00 1"), std::string::npos);
}

TEST(Cli, ScoreProblems) {
  TempDir tmp;
  write_file(tmp / "pred.jsonl",
             R"({"id":"real-0001","answer_value":650.16,"answer_unit":"L"})" "\n"
             R"({"id":"ghost","answer_value":1})" "\n");
  auto r = run_cli("score --task 3 --gold " + shell_quote(data_path("realfp_sample.jsonl")) + " --pred " +
                   q(tmp / "pred.jsonl") + " --out " + q(tmp / "r.txt"));
  EXPECT_EQ(r.code, 1);  // unknown id is a validation problem, report still written
  std::string report = read_file(tmp / "r.txt");
  // 1/3 of 1/3 of the way: (1/3 + 0 + 0) / 3.
  EXPECT_NE(report.find("answer_score all 0.11 3"), std::string::npos) << report;
  EXPECT_NE(report.find("outcome:no_prediction all - 2"), std::string::npos) << report;
  auto key_missing = run_cli("score --task 2 --gold " + shell_quote(data_path("realfp_sample.jsonl")) +
                             " --pred " + q(tmp / "pred.jsonl") + " --out " + q(tmp / "r2.txt"));
  EXPECT_EQ(key_missing.code, 2);
}

TEST(Cli, GenTasksAndScoreRoundTrip) {
  TempDir tmp;
  std::string kb = shell_quote(data_path("sample_kb.txt"));
  auto g1 = run_cli("gen --kb " + kb + " --size 120 --decompose-fraction 0.5 --seed 7 --out " + q(tmp / "a"));
  ASSERT_EQ(g1.code, 0) << g1.out;
  auto g2 = run_cli("gen --size 120 --decompose-fraction 0.5 --seed 7 --jobs 3 --out " + q(tmp / "b"),
                    "FERMI_KB_PATH=" + kb);
  ASSERT_EQ(g2.code, 0) << g2.out;
  EXPECT_EQ(dir_listing(tmp / "a"),
            (std::vector<std::string>{"manifest.json", "synthfp.jsonl", "test.jsonl", "train.jsonl",
                                      "validation.jsonl"}));
  for (const auto& name : dir_listing(tmp / "a"))
    EXPECT_EQ(read_file(tmp / "a" / name), read_file(tmp / "b" / name)) << name;
  auto all = read_records((tmp / "a" / "synthfp.jsonl").string());
  EXPECT_EQ(all.size(), 120u);
  EXPECT_EQ(read_records((tmp / "a" / "train.jsonl").string()).size(), 96u);
  auto manifest = nlohmann::json::parse(read_file(tmp / "a" / "manifest.json"));
  EXPECT_EQ(manifest["decomposed"], 60);

  auto t1 = run_cli("tasks build --task 2 --in " + q(tmp / "a" / "synthfp.jsonl") + " --seed 3 --out " +
                    q(tmp / "t1"));
  ASSERT_EQ(t1.code, 0) << t1.out;
  auto t2 = run_cli("tasks build --task 2 --in " + q(tmp / "a" / "synthfp.jsonl") + " --seed 3 --jobs 4 --out " +
                    q(tmp / "t2"));
  ASSERT_EQ(t2.code, 0);
  EXPECT_EQ(read_file(tmp / "t1" / "task2.jsonl"), read_file(tmp / "t2" / "task2.jsonl"));
  EXPECT_EQ(read_file(tmp / "t1" / "task2_key.jsonl"), read_file(tmp / "t2" / "task2_key.jsonl"));

  auto key = read_answer_key((tmp / "t1" / "task2_key.jsonl").string());
  write_file(tmp / "pred.jsonl", self_predictions(all, &key));
  auto s = run_cli("score --task 2 --gold " + q(tmp / "a" / "synthfp.jsonl") + " --key " +
                   q(tmp / "t1" / "task2_key.jsonl") + " --pred " + q(tmp / "pred.jsonl") + " --out " +
                   q(tmp / "rep.txt"));
  EXPECT_EQ(s.code, 0) << s.out;
  std::string report = read_file(tmp / "rep.txt");
  for (const char* line : {"answer_score all 1.00 120", "validity all 1.00 120", "pans_score all 1.00 120",
                           "fact_f1 all 1.00 120"})
    EXPECT_NE(report.find(line), std::string::npos) << line << "\n" << report;
}

TEST(Cli, GenErrors) {
  TempDir tmp;
  EXPECT_EQ(run_cli("gen --size 12 --seed 1 --out " + q(tmp / "x"), "FERMI_KB_PATH=").code, 2);
  EXPECT_EQ(run_cli("gen --kb " + shell_quote(data_path("sample_kb.txt")) + " --size 5 --seed 1 --out " +
                    q(tmp / "x"))
                .code,
            2);
  write_file(tmp / "tiny.txt", "a | volume | 1 L | s\nb | volume | 2 L | s\n");
  auto r = run_cli("gen --kb " + q(tmp / "tiny.txt") + " --size 12 --seed 1 --out " + q(tmp / "x"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("error: "), std::string::npos);
}

TEST(Cli, KbValidate) {
  auto ok = run_cli("kb validate " + shell_quote(data_path("sample_kb.txt")));
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("0 diagnostics"), std::string::npos);
  TempDir tmp;
  write_file(tmp / "bad.txt", "a | volume | 1 m | s\na | length | 1 m | s\na | length | 2 m | s\n");
  auto bad = run_cli("kb validate " + q(tmp / "bad.txt"));
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find(":1: DimensionError"), std::string::npos) << bad.out;
  EXPECT_NE(bad.out.find(":3: SchemaError"), std::string::npos) << bad.out;
  EXPECT_NE(bad.out.find("2 diagnostics"), std::string::npos);
}

TEST(Cli, BaselineConstant) {
  TempDir tmp;
  std::vector<FermiRecord> recs;
  for (int i = 0; i < 3; ++i) {
    FermiRecord r;
    r.id = "r" + std::to_string(i);
    r.question = "q";
    r.answer_value = 1000;
    r.answer_unit = "";
    r.program = "Q0 -> A1 because F1\nA1: 1000";
    r.facts = {{Identifier::fact(1), "f"}};
    r.source = Source::Real;
    recs.push_back(r);
  }
  write_records(recs, (tmp / "g.jsonl").string());
  auto r = run_cli("baseline constant --gold " + q(tmp / "g.jsonl"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("best 1000 1.00 over 3 answers"), std::string::npos) << r.out;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1 + 201 + 1);
}
