#pragma once

// Test helpers: random valid programs, messy re-renderings, temp dirs and a
// CLI runner.

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "fermi/fermi.hpp"

namespace testing_support {

namespace fs = std::filesystem;
using namespace fermi;

inline const std::vector<std::string>& sample_words() {
  static const std::vector<std::string> w = {
      "the", "average", "volume", "of", "a", "bucket", "is", "0.67", "cubic", "feet", "people", "A1", "F2",
      "6.7%", "per", "day", "because", "Mul(Q1)", "->", "|", "around", "1270000", "jelly-bean", "école", "x"};
  return w;
}

// Sentence with commas and tricky tokens, but never "<id>:" or "<id> ->"
// right after a comma.
inline std::string random_text(Rng& rng) {
  std::string out;
  int n = rng.between(1, 9);
  for (int i = 0; i < n; ++i) {
    if (i) out += rng.below(5) == 0 ? ", " : " ";
    const auto& w = sample_words()[rng.below(sample_words().size())];
    if (i > 0 && out.ends_with(", ") && (w == "A1" || w == "F2")) out += "about ";
    out += w;
  }
  if (rng.below(2)) out += ".";
  return out;
}

inline std::string random_value_text(Rng& rng) {
  static const std::vector<std::string> units = {"", "", "L", "m", "ft**3", "kg m**-3", "km/h", "USD", "GB", "s**2",
                                                 "m**2", "kg", "day"};
  double mantissa = 1.0 + static_cast<double>(rng.below(9000)) / 1000.0;
  double v = mantissa * std::pow(10.0, rng.between(-4, 9));
  std::string text = format_exact(v);
  const auto& u = units[rng.below(units.size())];
  if (!u.empty()) text += " " + u;
  return text;
}

// A valid program: questions form a DAG rooted at Q0; leaves cite values and
// facts; optional question/fact declarations; literals only in Mul/Div.
inline Program random_program(Rng& rng) {
  std::vector<Statement> st;
  const auto n_q = static_cast<std::uint32_t>(rng.between(1, 8));
  std::uint32_t next_value = 1, next_fact = 1;
  for (std::uint32_t q = n_q; q-- > 0;) {
    Identifier id = Identifier::question(q);
    std::uint32_t below = n_q - q - 1;  // questions with a larger index
    if (below == 0 || rng.below(3) == 0) {
      Identifier a = Identifier::value(next_value++);
      Identifier f = Identifier::fact(next_fact++);
      st.push_back(CompExpr{id, ValueRef{a, f}});
      st.push_back(ValueDecl{a, random_value_text(rng)});
      if (rng.below(4) != 0) st.push_back(FactDecl{f, random_text(rng)});
    } else {
      static constexpr std::array<ArithOp, 4> ops = {ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div};
      ArithOp op = ops[rng.below(4)];
      bool binary = op == ArithOp::Sub || op == ArithOp::Div;
      int arity = binary ? 2 : rng.between(2, 4);
      MathExpr m{op, {}};
      for (int i = 0; i < arity; ++i) {
        if ((op == ArithOp::Mul || op == ArithOp::Div) && rng.below(4) == 0) {
          m.args.emplace_back(static_cast<double>(rng.between(1, 100)) / (rng.below(2) ? 1.0 : 8.0));
        } else {
          m.args.emplace_back(Identifier::question(q + 1 + static_cast<std::uint32_t>(rng.below(below))));
        }
      }
      st.push_back(CompExpr{id, std::move(m)});
    }
    if (rng.below(2)) st.push_back(QuestionDecl{id, random_text(rng)});
  }
  rng.shuffle(st);
  return Program(std::move(st));
}

// Equivalent text in a non-canonical style: shuffled statements, mixed
// separators, "|" or "because", optional "P:" / "P ->" root and extra spaces.
inline std::string messy_render(const Program& p, Rng& rng) {
  std::vector<std::string> parts;
  for (const auto& s : p.statements()) {
    std::string text;
    if (auto* c = std::get_if<CompExpr>(&s)) {
      std::string head = c->target.str();
      std::string arrow = rng.below(2) ? " -> " : "->";
      if (c->target == Program::root()) {
        switch (rng.below(3)) {
          case 0: head = "P"; arrow = ": "; break;
          case 1: head = "P"; arrow = " -> "; break;
          default: break;
        }
      }
      text = head + arrow;
      if (auto* ref = std::get_if<ValueRef>(&c->body)) {
        text += ref->value.str() + (rng.below(2) ? " because " : " | ") + ref->because.str();
      } else {
        const auto& m = std::get<MathExpr>(c->body);
        text += std::string(to_string(m.op)) + (rng.below(2) ? " (" : "(");
        for (std::size_t i = 0; i < m.args.size(); ++i) {
          if (i) text += rng.below(2) ? ", " : ",";
          if (auto* q = std::get_if<Identifier>(&m.args[i])) text += q->str();
          else text += format_exact(std::get<double>(m.args[i]));
        }
        text += rng.below(2) ? " )" : ")";
      }
    } else {
      text = render_statement(s);
      if (rng.below(2)) text.insert(text.find(':') + 1, "  ");
    }
    parts.push_back(std::move(text));
  }
  rng.shuffle(parts);
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += rng.below(2) ? "\n" : ", ";
    out += parts[i];
  }
  return out;
}

inline std::string comma_render(const Program& p) {
  std::string canonical = render_program(p);
  std::string out;
  for (char c : canonical) out += c == '\n' ? std::string(", ") : std::string(1, c);
  return out;
}

// ---------------------------------------------------------------------------

struct TempDir {
  fs::path path;
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "fermi-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  fs::path operator/(const std::string& name) const { return path / name; }
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct RunResult {
  int code = -1;
  std::string out;  // stdout and stderr, interleaved
};

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

// Runs the fermi binary with `args` (already quoted where needed).
inline RunResult run_cli(const std::string& args, const std::string& env = "") {
  std::string cmd = env + (env.empty() ? "" : " ") + shell_quote(FERMI_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string data_path(const std::string& name) { return std::string(FERMI_DATA_DIR) + "/" + name; }

inline const std::string& water_program() {
  static const std::string text = read_file(data_path("water.prog"));
  return text;
}

}  // namespace testing_support
