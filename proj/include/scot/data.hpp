#pragma once

// Dataset ingestion, evaluation manifests and the two fine-tuning data
// builders (draft alignment records and selector label records).

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "scot/backend.hpp"
#include "scot/core.hpp"
#include "scot/drafting.hpp"
#include "scot/grading.hpp"
#include "scot/pipeline.hpp"
#include "scot/selection.hpp"

namespace scot {

inline constexpr int kDataSchemaVersion = 1;

/// Reads JSON-lines {id, question, answer?}. Numeric ids and answers are
/// accepted and stored as text.
inline std::vector<Question> load_dataset(std::istream& in) {
  std::vector<Question> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  auto as_text = [](const nlohmann::json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(e.what(), lineno);
    }
    if (!j.is_object()) throw ParseError("expected a JSON object", lineno);
    if (!j.contains("id") || j["id"].is_null())
      throw ParseError("missing field 'id'", lineno);
    if (!j.contains("question") || !j["question"].is_string())
      throw ParseError("missing string field 'question'", lineno);
    Question q;
    q.id = as_text(j["id"]);
    q.text = j["question"].get<std::string>();
    if (q.id.empty()) throw ParseError("empty id", lineno);
    if (q.text.empty()) throw ParseError("empty question", lineno);
    if (auto it = j.find("answer"); it != j.end() && !it->is_null())
      q.gold_answer = as_text(*it);
    if (!seen.insert(q.id).second) throw DuplicateId(q.id, lineno);
    out.push_back(std::move(q));
  }
  return out;
}

inline std::vector<Question> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset " + path);
  return load_dataset(in);
}

inline void write_dataset(std::ostream& out, const std::vector<Question>& qs) {
  for (const auto& q : qs) {
    nlohmann::ordered_json j = {{"id", q.id}, {"question", q.text}};
    if (q.gold_answer) j["answer"] = *q.gold_answer;
    out << j.dump() << '\n';
  }
}

/// Held-out question ids. File format: one id per line, '#' starts a comment.
class EvaluationManifest {
 public:
  EvaluationManifest() = default;
  explicit EvaluationManifest(std::unordered_set<std::string> ids)
      : ids_(std::move(ids)) {}

  static EvaluationManifest load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest " + path);
    std::unordered_set<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      const auto e = line.find_last_not_of(" \t\r");
      ids.insert(line.substr(b, e - b + 1));
    }
    return EvaluationManifest(std::move(ids));
  }

  bool contains(const std::string& id) const { return ids_.contains(id); }
  std::size_t size() const { return ids_.size(); }

  /// Throws ManifestOverlap naming the held-out ids found in `questions`.
  void require_disjoint(const std::vector<Question>& questions) const {
    std::vector<std::string> overlap;
    for (const auto& q : questions)
      if (contains(q.id)) overlap.push_back(q.id);
    if (overlap.empty()) return;
    std::string msg = std::to_string(overlap.size()) +
                      " question id(s) are held out for evaluation:";
    for (std::size_t i = 0; i < overlap.size() && i < 5; ++i)
      msg += " " + overlap[i];
    if (overlap.size() > 5) msg += " ...";
    throw ManifestOverlap(msg);
  }

 private:
  std::unordered_set<std::string> ids_;
};

namespace detail {

/// Calls fn(i) for every i in [0, count) on up to `parallelism` threads.
template <class Fn>
void parallel_for(std::size_t count, int parallelism, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) fn(i);
  };
  const auto workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(parallelism, 1)), count);
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
}

}  // namespace detail

// ---- draft alignment data -------------------------------------------------

struct AlignmentRecord {
  std::string id;
  std::string question_text;
  std::string target_cot;
  std::int64_t prompt_len = 0;  // prompt tokens as reported by the backend
};

struct AlignmentBuild {
  std::vector<AlignmentRecord> records;
  std::size_t skipped_open = 0;   // think block never closed
  std::size_t skipped_error = 0;  // backend error
  std::vector<std::string> errors;
};

/// One record per question whose target generation closed its think block.
inline AlignmentBuild build_alignment_data(const std::vector<Question>& questions,
                                           Backend& target,
                                           const PipelineConfig& cfg,
                                           const EvaluationManifest& manifest = {}) {
  manifest.require_disjoint(questions);
  struct Slot {
    std::optional<AlignmentRecord> record;
    bool open = false;
    std::optional<std::string> error;
  };
  std::vector<Slot> slots(questions.size());
  detail::parallel_for(questions.size(), cfg.question_parallelism, [&](std::size_t i) {
    const auto& q = questions[i];
    auto params = cfg.target_params;
    if (!params.seed) params.seed = cfg.base_seed;
    try {
      const auto gen = target.generate(question_prompt(q, cfg), params);
      const auto block = split_generated_cot(gen.text, cfg.delims, false);
      if (!block.closed) {
        slots[i].open = true;
        return;
      }
      slots[i].record = AlignmentRecord{q.id, q.text, block.cot, gen.prompt_tokens};
    } catch (const Error& e) {
      slots[i].error = q.id + ": " + e.what();
    }
  });

  AlignmentBuild out;
  for (auto& s : slots) {
    if (s.record) out.records.push_back(std::move(*s.record));
    if (s.open) ++out.skipped_open;
    if (s.error) {
      ++out.skipped_error;
      out.errors.push_back(std::move(*s.error));
    }
  }
  return out;
}

inline void write_alignment_jsonl(std::ostream& out,
                                  const std::vector<AlignmentRecord>& records) {
  for (const auto& r : records)
    out << nlohmann::ordered_json{{"schema_version", kDataSchemaVersion},
                                  {"id", r.id},
                                  {"question_text", r.question_text},
                                  {"target_cot", r.target_cot},
                                  {"prompt_len", r.prompt_len}}
               .dump()
        << '\n';
}

// ---- selector label data --------------------------------------------------

/// Indices of correct drafts, or {n+1} when none is correct.
inline std::set<int> label_set_from_mask(const std::vector<bool>& correct) {
  std::set<int> labels;
  for (std::size_t i = 0; i < correct.size(); ++i)
    if (correct[i]) labels.insert(static_cast<int>(i) + 1);
  if (labels.empty()) labels.insert(static_cast<int>(correct.size()) + 1);
  return labels;
}

struct SelectionRecord {
  std::string id;
  std::string rendered_prompt;
  std::set<int> label_set;
  int n = 0;
  std::vector<bool> draft_correct;
  bool all_drafts_failed = false;
};

using AnswerGrader = std::function<bool(std::string_view answer, std::string_view gold)>;

inline constexpr std::int64_t kLabelAnswerMaxTokens = 512;

/// Drafts n chains per question exactly as inference does, elicits each
/// draft's own answer from the draft backend, grades it against the gold
/// answer and records the label set next to the rendered selection prompt.
inline std::vector<SelectionRecord> build_selection_data(
    const std::vector<Question>& questions, Backend& draft_backend,
    const PipelineConfig& cfg, const AnswerGrader& grader = grade_answer,
    const EvaluationManifest& manifest = {},
    std::int64_t answer_max_tokens = kLabelAnswerMaxTokens) {
  manifest.require_disjoint(questions);
  for (const auto& q : questions)
    if (!q.gold_answer)
      throw InvalidArgument("question " + q.id + " has no gold answer");
  const int n = cfg.effective_n();

  std::vector<SelectionRecord> out(questions.size());
  detail::parallel_for(questions.size(), cfg.question_parallelism, [&](std::size_t qi) {
    const auto& q = questions[qi];
    const auto prompt = question_prompt(q, cfg);
    auto& rec = out[qi];
    rec.id = q.id;
    rec.n = n;

    auto params = cfg.draft_params;
    if (!params.seed) params.seed = cfg.base_seed;
    std::vector<CotDraft> drafts;
    std::vector<bool> usable(static_cast<std::size_t>(n), true);
    try {
      auto set = draft_chains(prompt, n, params, draft_backend, cfg.delims);
      drafts = std::move(set.drafts);
      for (const auto& f : set.failures)
        usable[static_cast<std::size_t>(f.index - 1)] = false;
    } catch (const AllDraftsFailed&) {
      rec.all_drafts_failed = true;
      for (int i = 1; i <= n; ++i) drafts.push_back({i, "", 0, 0.0, true});
      std::fill(usable.begin(), usable.end(), false);
    }

    rec.draft_correct.assign(static_cast<std::size_t>(n), false);
    for (int i = 0; i < n; ++i) {
      if (!usable[static_cast<std::size_t>(i)]) continue;
      GenerationParams ap = cfg.draft_params;
      ap.max_new_tokens = answer_max_tokens;
      ap.seed = *params.seed + i + 1;
      ap.stop_sequences = {cfg.delims.open};
      try {
        const auto gen = draft_backend.generate(
            {prompt.user,
             cfg.delims.open + drafts[static_cast<std::size_t>(i)].text +
                 cfg.delims.close},
            ap);
        rec.draft_correct[static_cast<std::size_t>(i)] =
            grader(gen.text, *q.gold_answer);
      } catch (const Error&) {
      }
    }
    rec.label_set = label_set_from_mask(rec.draft_correct);
    rec.rendered_prompt =
        render_selection_prompt(q.text, drafts, cfg.special_text,
                                cfg.selection_template)
            .rendered;
  });
  return out;
}

inline void write_selection_jsonl(std::ostream& out,
                                  const std::vector<SelectionRecord>& records) {
  for (const auto& r : records) {
    nlohmann::ordered_json j = {{"schema_version", kDataSchemaVersion},
                                {"id", r.id},
                                {"rendered_prompt", r.rendered_prompt},
                                {"label_set", r.label_set},
                                {"n", r.n},
                                {"draft_correct", r.draft_correct},
                                {"all_drafts_failed", r.all_drafts_failed}};
    out << j.dump() << '\n';
  }
}

}  // namespace scot
