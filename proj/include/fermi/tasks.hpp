#pragma once

// Challenge task views over dataset records.
//
//   1 perfect-context     question + the record's own facts
//   2 distractor-context  question + gold facts mixed with facts of similar
//                         questions, 20 in total, shuffled and renumbered
//   3 full                question only
//
// Model-facing task files and the answer keys mapping shown fact ids back to
// gold ids are separate files, both line-delimited JSON behind a header line.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fermi/error.hpp"
#include "fermi/parallel.hpp"
#include "fermi/program.hpp"
#include "fermi/random.hpp"
#include "fermi/record.hpp"

namespace fermi {

inline constexpr std::size_t kDistractorContextSize = 20;

enum class TaskKind { PerfectContext = 1, DistractorContext = 2, Full = 3 };

inline std::optional<TaskKind> task_from_number(int n) {
  if (n >= 1 && n <= 3) return static_cast<TaskKind>(n);
  return std::nullopt;
}

inline std::string_view to_string(TaskKind t) {
  switch (t) {
    case TaskKind::PerfectContext: return "perfect_context";
    case TaskKind::DistractorContext: return "distractor_context";
    case TaskKind::Full: return "full";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Similarity

// Lowercased alphanumeric runs.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

using SparseVector = std::vector<std::pair<std::size_t, double>>;  // sorted by term id

inline double sparse_dot(const SparseVector& a, const SparseVector& b) {
  double sum = 0.0;
  auto i = a.begin(), j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (i->first < j->first) ++i;
    else if (j->first < i->first) ++j;
    else sum += (i++)->second * (j++)->second;
  }
  return sum;
}

// TF-IDF over a corpus of questions: raw term counts weighted by the smoothed
// idf log((1 + N) / (1 + df)) + 1, then L2-normalized. Terms unseen in the
// corpus get df = 0.
class TfidfIndex {
 public:
  explicit TfidfIndex(const std::vector<std::string>& corpus) {
    std::vector<std::vector<std::string>> tokens;
    tokens.reserve(corpus.size());
    std::map<std::string, std::size_t> df;
    for (const auto& doc : corpus) {
      tokens.push_back(tokenize(doc));
      std::set<std::string> uniq(tokens.back().begin(), tokens.back().end());
      for (const auto& t : uniq) ++df[t];
    }
    n_docs_ = corpus.size();
    for (const auto& [term, count] : df) {
      vocab_.emplace(term, vocab_.size());
      idf_.push_back(idf(count));
    }
    vectors_.reserve(tokens.size());
    for (const auto& toks : tokens) vectors_.push_back(weigh(toks).first);
  }

  std::size_t size() const { return vectors_.size(); }
  const SparseVector& vector(std::size_t doc) const { return vectors_.at(doc); }

  double similarity(std::size_t a, std::size_t b) const {
    return std::clamp(sparse_dot(vectors_.at(a), vectors_.at(b)), 0.0, 1.0);
  }

  // Cosine similarity of two arbitrary strings under this corpus's idf.
  double similarity(std::string_view q1, std::string_view q2) const {
    auto [a, extra_a] = weigh(tokenize(q1));
    auto [b, extra_b] = weigh(tokenize(q2));
    // Out-of-vocabulary terms are matched by text.
    double dot = sparse_dot(a, b);
    for (const auto& [term, w] : extra_a)
      if (auto it = extra_b.find(term); it != extra_b.end()) dot += w * it->second;
    return std::clamp(dot, 0.0, 1.0);
  }

 private:
  double idf(std::size_t df) const {
    return std::log((1.0 + static_cast<double>(n_docs_)) / (1.0 + static_cast<double>(df))) + 1.0;
  }

  // Normalized in-vocabulary vector plus normalized weights of unseen terms.
  std::pair<SparseVector, std::map<std::string, double>> weigh(const std::vector<std::string>& toks) const {
    std::map<std::size_t, double> counts;
    std::map<std::string, double> unseen;
    for (const auto& t : toks) {
      if (auto it = vocab_.find(t); it != vocab_.end()) counts[it->second] += 1.0;
      else unseen[t] += 1.0;
    }
    double norm = 0.0;
    SparseVector v;
    for (auto& [id, c] : counts) {
      v.emplace_back(id, c * idf_[id]);
      norm += v.back().second * v.back().second;
    }
    for (auto& [t, c] : unseen) {
      c *= idf(0);
      norm += c * c;
    }
    if (norm > 0) {
      norm = std::sqrt(norm);
      for (auto& [_, w] : v) w /= norm;
      for (auto& [_, w] : unseen) w /= norm;
    }
    return {std::move(v), std::move(unseen)};
  }

  std::size_t n_docs_ = 0;
  std::map<std::string, std::size_t> vocab_;
  std::vector<double> idf_;
  std::vector<SparseVector> vectors_;
};

// Similarity between questions of an indexed record list.
class QuestionSimilarity {
 public:
  virtual ~QuestionSimilarity() = default;
  virtual double operator()(std::size_t a, std::size_t b) const = 0;
  virtual std::size_t size() const = 0;
};

class TfidfSimilarity final : public QuestionSimilarity {
 public:
  explicit TfidfSimilarity(const std::vector<std::string>& questions) : index_(questions) {}
  double operator()(std::size_t a, std::size_t b) const override { return index_.similarity(a, b); }
  std::size_t size() const override { return index_.size(); }
  const TfidfIndex& index() const { return index_; }

 private:
  TfidfIndex index_;
};

// Cosine similarity of externally supplied vectors (e.g. sentence embeddings),
// clamped to [0, 1].
class VectorSimilarity final : public QuestionSimilarity {
 public:
  explicit VectorSimilarity(std::vector<std::vector<double>> vectors) : vectors_(std::move(vectors)) {
    for (auto& v : vectors_) {
      double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
      if (norm > 0)
        for (auto& x : v) x /= norm;
    }
  }
  double operator()(std::size_t a, std::size_t b) const override {
    const auto& x = vectors_.at(a);
    const auto& y = vectors_.at(b);
    if (x.size() != y.size()) throw Error(ErrorKind::SchemaError, "question vectors differ in length");
    return std::clamp(std::inner_product(x.begin(), x.end(), y.begin(), 0.0), 0.0, 1.0);
  }
  std::size_t size() const override { return vectors_.size(); }

 private:
  std::vector<std::vector<double>> vectors_;
};

inline std::vector<std::string> questions_of(const std::vector<FermiRecord>& records) {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.question);
  return out;
}

// ---------------------------------------------------------------------------
// Task instances

struct TaskInstance {
  TaskKind task = TaskKind::Full;
  std::string record_id;
  std::string question;
  Split split = Split::Train;
  std::vector<FactEntry> input_facts;
  FactIdSet gold_fact_ids;                       // in shown (renumbered) ids
  std::map<Identifier, Identifier> gold_mapping;  // record fact id -> shown id
  std::map<Identifier, std::string> sources;      // shown id -> "record:Fk"
  bool over_limit = false;                        // more gold facts than the context size
};

namespace detail {

// Other records ordered by decreasing similarity (ties: lower index first).
// Only the first `want` entries are guaranteed sorted; the rest follow in
// the same order when the caller asks for more.
inline std::vector<std::size_t> rank_neighbors(std::size_t self, std::size_t n, const QuestionSimilarity& sim,
                                               std::size_t want) {
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(n);
  for (std::size_t j = 0; j < n; ++j)
    if (j != self) scored.emplace_back(sim(self, j), j);
  auto better = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
  want = std::min(want, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(want), scored.end(), better);
  std::sort(scored.begin() + static_cast<std::ptrdiff_t>(want), scored.end(), better);
  std::vector<std::size_t> out;
  out.reserve(scored.size());
  for (const auto& [_, j] : scored) out.push_back(j);
  return out;
}

inline TaskInstance distractor_instance(const std::vector<FermiRecord>& records, std::size_t i,
                                        const QuestionSimilarity& sim, std::uint64_t seed) {
  const FermiRecord& rec = records[i];
  TaskInstance inst;
  std::set<std::string> taken;
  struct Pending {
    std::string text;
    std::string source;
    std::optional<Identifier> gold;
  };
  std::vector<Pending> pool;
  for (const auto& f : rec.facts) {
    taken.insert(f.text);
    pool.push_back({f.text, rec.id + ":" + f.id.str(), f.id});
  }
  inst.over_limit = rec.facts.size() > kDistractorContextSize;
  if (pool.size() < kDistractorContextSize) {
    for (std::size_t j : rank_neighbors(i, records.size(), sim, 64)) {
      for (const auto& f : records[j].facts) {
        if (pool.size() >= kDistractorContextSize) break;
        if (!taken.insert(f.text).second) continue;
        pool.push_back({f.text, records[j].id + ":" + f.id.str(), std::nullopt});
      }
      if (pool.size() >= kDistractorContextSize) break;
    }
    if (pool.size() < kDistractorContextSize) {
      throw Error(ErrorKind::InsufficientPool,
                  rec.id + ": only " + std::to_string(pool.size()) + " distinct facts available for the context",
                  rec.id);
    }
  }
  Rng rng(mix_seed(seed, i));
  rng.shuffle(pool);
  for (std::size_t k = 0; k < pool.size(); ++k) {
    Identifier shown = Identifier::fact(static_cast<std::uint32_t>(k + 1));
    inst.input_facts.push_back({shown, pool[k].text});
    inst.sources[shown] = pool[k].source;
    if (pool[k].gold) {
      inst.gold_fact_ids.insert(shown);
      inst.gold_mapping[*pool[k].gold] = shown;
    }
  }
  return inst;
}

}  // namespace detail

// `similarity` is only consulted for the distractor task; it must index the
// same records in the same order.
inline std::vector<TaskInstance> build_task(const std::vector<FermiRecord>& records, TaskKind task,
                                            const QuestionSimilarity* similarity, std::uint64_t seed,
                                            unsigned jobs = 1) {
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "no records to build tasks from");
  std::unique_ptr<TfidfSimilarity> fallback;
  if (task == TaskKind::DistractorContext && similarity == nullptr) {
    fallback = std::make_unique<TfidfSimilarity>(questions_of(records));
    similarity = fallback.get();
  }
  if (similarity && similarity->size() != records.size())
    throw Error(ErrorKind::UsageError, "similarity index does not match the record list");

  std::vector<TaskInstance> out(records.size());
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    const FermiRecord& rec = records[i];
    TaskInstance inst;
    if (task == TaskKind::DistractorContext) {
      inst = detail::distractor_instance(records, i, *similarity, seed);
    } else {
      for (const auto& f : rec.facts) {
        inst.gold_fact_ids.insert(f.id);
        inst.gold_mapping[f.id] = f.id;
        inst.sources[f.id] = rec.id + ":" + f.id.str();
      }
      if (task == TaskKind::PerfectContext) inst.input_facts = rec.facts;
    }
    inst.task = task;
    inst.record_id = rec.id;
    inst.question = rec.question;
    inst.split = rec.split;
    out[i] = std::move(inst);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Files

inline constexpr int kTaskFormatVersion = 1;

inline void write_task_file(const std::vector<TaskInstance>& instances, TaskKind task, std::ostream& out) {
  out << nlohmann::ordered_json{{"format", "fermi-task"}, {"version", kTaskFormatVersion},
                                {"task", static_cast<int>(task)}}
             .dump()
      << '\n';
  for (const auto& inst : instances) {
    nlohmann::ordered_json j;
    j["id"] = inst.record_id;
    j["question"] = inst.question;
    j["split"] = to_string(inst.split);
    j["facts"] = facts_to_json(inst.input_facts);
    out << j.dump() << '\n';
  }
}

inline void write_answer_key(const std::vector<TaskInstance>& instances, TaskKind task, std::ostream& out) {
  out << nlohmann::ordered_json{{"format", "fermi-answer-key"}, {"version", kTaskFormatVersion},
                                {"task", static_cast<int>(task)}}
             .dump()
      << '\n';
  for (const auto& inst : instances) {
    nlohmann::ordered_json j;
    j["id"] = inst.record_id;
    auto gold = nlohmann::ordered_json::array();
    for (const auto& id : inst.gold_fact_ids) gold.push_back(id.str());
    j["gold_fact_ids"] = gold;
    nlohmann::ordered_json mapping = nlohmann::ordered_json::object();
    for (const auto& [from, to] : inst.gold_mapping) mapping[from.str()] = to.str();
    j["gold_mapping"] = mapping;
    nlohmann::ordered_json sources = nlohmann::ordered_json::object();
    for (const auto& [id, src] : inst.sources) sources[id.str()] = src;
    j["sources"] = sources;
    j["over_limit"] = inst.over_limit;
    out << j.dump() << '\n';
  }
}

struct TaskFileEntry {
  std::string id;
  std::string question;
  Split split = Split::Train;
  std::vector<FactEntry> facts;
};

struct AnswerKeyEntry {
  FactIdSet gold_fact_ids;
  std::map<Identifier, Identifier> gold_mapping;
  std::map<Identifier, std::string> sources;
  bool over_limit = false;
};

namespace detail {

inline Identifier fact_id_or_throw(const std::string& text, const std::string& where) {
  auto id = Identifier::parse(text);
  if (!id || id->kind != IdKind::Fact) throw Error(ErrorKind::SchemaError, where + ": bad fact id '" + text + "'", where);
  return *id;
}

template <typename Fn>
int read_headed_lines(std::istream& in, const std::string& name, std::string_view format, Fn&& on_line) {
  std::string line;
  int line_no = 0;
  int task = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::string where = name + ":" + std::to_string(line_no);
    auto j = parse_line(line, where);
    if (line_no == 1) {
      if (!check_header(j, format, where))
        throw Error(ErrorKind::SchemaError, where + ": missing '" + std::string(format) + "' header", where);
      task = j.value("task", 0);
      continue;
    }
    on_line(j, where);
  }
  if (line_no == 0) throw Error(ErrorKind::SchemaError, name + ": empty file", name);
  return task;
}

}  // namespace detail

inline std::vector<TaskFileEntry> read_task_file(std::istream& in, const std::string& name = "<stream>") {
  std::vector<TaskFileEntry> out;
  detail::read_headed_lines(in, name, "fermi-task", [&](const nlohmann::json& j, const std::string& where) {
    TaskFileEntry e;
    e.id = detail::require_string(j, "id", where);
    e.question = detail::require_string(j, "question", where);
    auto split = parse_split(detail::require_string(j, "split", where));
    if (!split) throw Error(ErrorKind::SchemaError, where + ": bad split", where);
    e.split = *split;
    e.facts = detail::facts_from_json(j.value("facts", nlohmann::json::array()), where);
    out.push_back(std::move(e));
  });
  return out;
}

inline std::map<std::string, AnswerKeyEntry> read_answer_key(std::istream& in, const std::string& name = "<stream>") {
  std::map<std::string, AnswerKeyEntry> out;
  detail::read_headed_lines(in, name, "fermi-answer-key", [&](const nlohmann::json& j, const std::string& where) {
    std::string id = detail::require_string(j, "id", where);
    AnswerKeyEntry e;
    try {
      for (const auto& g : j.at("gold_fact_ids")) e.gold_fact_ids.insert(detail::fact_id_or_throw(g, where));
      for (const auto& [from, to] : j.at("gold_mapping").items())
        e.gold_mapping[detail::fact_id_or_throw(from, where)] = detail::fact_id_or_throw(to, where);
      if (j.contains("sources"))
        for (const auto& [shown, src] : j["sources"].items())
          e.sources[detail::fact_id_or_throw(shown, where)] = src.get<std::string>();
      e.over_limit = j.value("over_limit", false);
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorKind::SchemaError, where + ": bad answer-key entry (" + ex.what() + ")", where);
    }
    if (!out.emplace(id, std::move(e)).second)
      throw Error(ErrorKind::SchemaError, where + ": duplicate id '" + id + "'", where);
  });
  return out;
}

inline std::map<std::string, AnswerKeyEntry> read_answer_key(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'", path);
  return read_answer_key(in, path);
}

// Per-record vectors for VectorSimilarity: lines of {"id":..., "vector":[...]},
// reordered to match `records`.
inline std::vector<std::vector<double>> read_question_vectors(std::istream& in,
                                                              const std::vector<FermiRecord>& records,
                                                              const std::string& name = "<stream>") {
  std::map<std::string, std::vector<double>> by_id;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::string where = name + ":" + std::to_string(line_no);
    auto j = detail::parse_line(line, where);
    try {
      by_id[j.at("id").get<std::string>()] = j.at("vector").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::SchemaError, where + ": bad vector line (" + e.what() + ")", where);
    }
  }
  std::vector<std::vector<double>> out;
  for (const auto& r : records) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) throw Error(ErrorKind::SchemaError, name + ": no vector for record '" + r.id + "'", r.id);
    out.push_back(it->second);
  }
  return out;
}

}  // namespace fermi
