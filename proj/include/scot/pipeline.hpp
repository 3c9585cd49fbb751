#pragma once

// End-to-end orchestration: speculative draft -> select -> answer-or-rethink,
// the vanilla target baseline, and batch execution.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "scot/backend.hpp"
#include "scot/core.hpp"
#include "scot/drafting.hpp"
#include "scot/grading.hpp"
#include "scot/selection.hpp"

namespace scot {

struct PipelineConfig {
  int n = kDefaultDraftCount;
  bool single_draft = false;
  bool error_correction = true;
  GenerationParams draft_params{kDefaultDraftTemperature, kDefaultDraftMaxTokens,
                                std::nullopt, {}};
  GenerationParams target_params{kDefaultDraftTemperature, kDefaultCotMaxTokens,
                                 std::nullopt, {}};
  ThinkDelimiters delims;
  std::string special_text{kDefaultSpecialText};
  SelectionTemplate selection_template = SelectionTemplate::v1();
  std::string question_template = "{question}";
  std::int64_t base_seed = 0;
  int question_parallelism = 1;
  std::string dataset = "dataset";

  int effective_n() const { return single_draft ? 1 : n; }

  void validate() const {
    require_draft_count(n);
    draft_params.validate();
    target_params.validate();
    delims.validate();
    if (question_parallelism < 1)
      throw InvalidArgument("question_parallelism must be >= 1");
    if (question_template.find("{question}") == std::string::npos)
      throw InvalidArgument("question_template needs a {question} placeholder");
    if (error_correction && special_text.empty())
      throw InvalidArgument("special option text must be non-empty");
  }
};

/// The three roles a run talks to. The selector may be a fine-tuned copy of
/// the target served separately; all three may point at one server.
struct Endpoints {
  BackendPtr draft;
  BackendPtr selector;
  BackendPtr answer;
};

inline ChatPrompt question_prompt(const Question& q, const PipelineConfig& cfg) {
  std::string user = cfg.question_template;
  const auto at = user.find("{question}");
  user.replace(at, 10, q.text);
  return {std::move(user), ""};
}

namespace detail {

class StageClock {
 public:
  explicit StageClock(bool virtual_time)
      : virtual_(virtual_time), start_(now()), mark_(start_) {}

  bool is_virtual() const { return virtual_; }

  /// Stage duration: the modeled value under virtual time, otherwise the wall
  /// time since the previous lap.
  double lap(double modeled_ms) {
    const auto t = now();
    const double wall =
        std::chrono::duration<double, std::milli>(t - mark_).count();
    mark_ = t;
    return virtual_ ? modeled_ms : wall;
  }

  double total(const StageLatencies& stages) const {
    if (virtual_) return stages.sum_ms();
    return std::chrono::duration<double, std::milli>(mark_ - start_).count();
  }

 private:
  static std::chrono::steady_clock::time_point now() {
    return std::chrono::steady_clock::now();
  }
  bool virtual_;
  std::chrono::steady_clock::time_point start_;
  std::chrono::steady_clock::time_point mark_;
};

inline bool all_virtual(std::initializer_list<const Backend*> backends) {
  return std::all_of(backends.begin(), backends.end(), [](const Backend* b) {
    return b->timing() == Timing::Virtual;
  });
}

inline GenerationParams with_stop(GenerationParams p, const std::string& stop,
                                  std::int64_t seed) {
  if (std::find(p.stop_sequences.begin(), p.stop_sequences.end(), stop) ==
      p.stop_sequences.end())
    p.stop_sequences.push_back(stop);
  if (!p.seed) p.seed = seed;
  return p;
}

inline void grade_trace(ReasoningTrace& t, const Question& q) {
  if (!q.gold_answer) return;
  const auto g = grade(t.answer_text, *q.gold_answer);
  t.correct = g.correct;
  t.extracted_answer = g.extracted;
}

/// Target-side thinking from the bare question (rethink / vanilla).
inline void think_with_target(ReasoningTrace& t, const ChatPrompt& prompt,
                              const PipelineConfig& cfg, Backend& answer,
                              StageClock& clock) {
  const auto gen = answer.generate(
      prompt, with_stop(cfg.target_params, cfg.delims.close, cfg.base_seed));
  const auto block = split_generated_cot(gen.text, cfg.delims,
                                         gen.finish_reason == FinishReason::Stop);
  t.final_cot = block.cot;
  t.l_M = gen.token_count;
  t.stage_latencies_ms.target_thinking_ms = clock.lap(gen.duration_ms);
}

/// Answer phase: the finished chain is injected as the model's own completed
/// thinking and the target continues; a re-opened think block is cut off.
inline void answer_from_cot(ReasoningTrace& t, const ChatPrompt& prompt,
                            const PipelineConfig& cfg, Backend& answer,
                            StageClock& clock) {
  const ChatPrompt continued{
      prompt.user, cfg.delims.open + t.final_cot + cfg.delims.close};
  const auto gen = answer.generate(
      continued, with_stop(cfg.target_params, cfg.delims.open, cfg.base_seed));
  t.answer_text = gen.text;
  t.answer_tokens = gen.token_count;
  t.stage_latencies_ms.answering_ms = clock.lap(gen.duration_ms);
}

inline ReasoningTrace new_trace(const Question& q, const PipelineConfig& cfg,
                                RunMode mode) {
  ReasoningTrace t;
  t.question_id = q.id;
  t.dataset = cfg.dataset;
  t.mode = mode;
  t.cot_source =
      mode == RunMode::SCoT ? CotSource::rethink() : CotSource::vanilla();
  return t;
}

}  // namespace detail

/// Vanilla baseline: the target thinks and answers on its own.
inline ReasoningTrace run_vanilla(const Question& q, const PipelineConfig& cfg,
                                  const Endpoints& ep) {
  auto t = detail::new_trace(q, cfg, RunMode::Vanilla);
  detail::StageClock clock(detail::all_virtual({ep.answer.get()}));
  try {
    const auto prompt = question_prompt(q, cfg);
    detail::think_with_target(t, prompt, cfg, *ep.answer, clock);
    detail::answer_from_cot(t, prompt, cfg, *ep.answer, clock);
    detail::grade_trace(t, q);
  } catch (const std::exception& e) {
    t.failure = e.what();
  }
  t.total_latency_ms = clock.total(t.stage_latencies_ms);
  return t;
}

/// Speculative chain-of-thought for one question.
inline ReasoningTrace run_scot(const Question& q, const PipelineConfig& cfg,
                               const Endpoints& ep) {
  auto t = detail::new_trace(q, cfg, RunMode::SCoT);
  const int n = cfg.effective_n();
  t.n = n;
  detail::StageClock clock(detail::all_virtual(
      {ep.draft.get(), ep.selector.get(), ep.answer.get()}));

  try {
    const auto prompt = question_prompt(q, cfg);

    auto draft_params = cfg.draft_params;
    if (!draft_params.seed) draft_params.seed = cfg.base_seed;
    bool drafts_failed = false;
    double drafting_ms = 0.0;
    try {
      auto set = draft_chains(prompt, n, draft_params, *ep.draft, cfg.delims);
      t.drafts = std::move(set.drafts);
      drafting_ms = set.elapsed_ms;
    } catch (const AllDraftsFailed&) {
      drafts_failed = true;
      for (int i = 1; i <= n; ++i) t.drafts.push_back({i, "", 0, 0.0, true});
    }
    t.l_Md = longest_draft_tokens(t.drafts);
    t.stage_latencies_ms.drafting_ms = clock.lap(drafting_ms);

    Decision decision = Rethink{};
    if (drafts_failed) {
      if (!cfg.error_correction)
        throw AllDraftsFailed("all drafts failed and error correction is off");
      t.selection = SelectionOutcome{n + 1, {}, 0.0, false};
      t.stage_latencies_ms.selection_ms = clock.lap(0.0);
    } else {
      const auto sp = render_selection_prompt(
          q.text, t.drafts,
          cfg.error_correction ? std::optional<std::string>(cfg.special_text)
                               : std::nullopt,
          cfg.selection_template);
      SelectionOutcome outcome;
      try {
        outcome = select_draft(sp, *ep.selector);
      } catch (const SelectionFailed& e) {
        // conservative: rethink, or the first draft when rethink is disabled
        outcome = {cfg.error_correction ? n + 1 : 1, {}, e.latency_ms(), true};
      }
      t.selection = outcome;
      t.stage_latencies_ms.selection_ms = clock.lap(outcome.latency_ms);
      decision = decide(outcome, n);
    }

    if (const auto* use = std::get_if<UseDraft>(&decision)) {
      t.cot_source = CotSource::accepted(use->index);
      t.final_cot = t.drafts[static_cast<std::size_t>(use->index - 1)].text;
      t.stage_latencies_ms.target_thinking_ms = clock.lap(0.0);
      t.l_M = 0;
    } else {
      t.cot_source = CotSource::rethink();
      detail::think_with_target(t, prompt, cfg, *ep.answer, clock);
    }
    detail::answer_from_cot(t, prompt, cfg, *ep.answer, clock);
    detail::grade_trace(t, q);
  } catch (const std::exception& e) {
    t.failure = e.what();
    clock.lap(0.0);
  }
  t.total_latency_ms = clock.total(t.stage_latencies_ms);
  return t;
}

/// Runs every question, up to cfg.question_parallelism at a time. Output
/// order follows input order; per-question failures become failure traces.
inline std::vector<ReasoningTrace> run_batch(const std::vector<Question>& questions,
                                             const PipelineConfig& cfg,
                                             const Endpoints& ep, RunMode mode) {
  cfg.validate();
  std::vector<ReasoningTrace> out(questions.size());
  if (questions.empty()) return out;

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < questions.size(); i = next++) {
      try {
        out[i] = mode == RunMode::SCoT ? run_scot(questions[i], cfg, ep)
                                       : run_vanilla(questions[i], cfg, ep);
      } catch (const std::exception& e) {
        out[i] = detail::new_trace(questions[i], cfg, mode);
        out[i].failure = e.what();
      }
    }
  };
  const auto workers = std::min<std::size_t>(
      static_cast<std::size_t>(cfg.question_parallelism), questions.size());
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  pool.clear();  // joins
  return out;
}

}  // namespace scot
