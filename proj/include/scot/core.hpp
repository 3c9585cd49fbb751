#pragma once

// Domain types shared by every stage of the speculative chain-of-thought
// engine, plus think-block extraction.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scot/errors.hpp"

namespace scot {

inline constexpr std::string_view kDefaultThinkOpen = "<think>";
inline constexpr std::string_view kDefaultThinkClose = "</think>";
inline constexpr std::string_view kDefaultSpecialText =
    "All reasoning paths are wrong.";

inline constexpr int kDefaultDraftCount = 5;
inline constexpr int kMaxDraftCount = 9;  // option labels are single digits
inline constexpr double kDefaultDraftTemperature = 0.6;
inline constexpr int kDefaultDraftMaxTokens = 5000;
inline constexpr int kDefaultCotMaxTokens = 20480;

struct Question {
  std::string id;
  std::string text;
  std::optional<std::string> gold_answer;

  bool operator==(const Question&) const = default;
};

struct GenerationParams {
  double temperature = kDefaultDraftTemperature;
  std::int64_t max_new_tokens = kDefaultDraftMaxTokens;
  std::optional<std::int64_t> seed;
  std::vector<std::string> stop_sequences;

  /// Throws InvalidArgument on a negative temperature or a zero cap.
  void validate() const {
    if (!(temperature >= 0.0))
      throw InvalidArgument("temperature must be >= 0");
    if (max_new_tokens < 1) throw InvalidArgument("max_new_tokens must be >= 1");
  }
};

struct ThinkDelimiters {
  std::string open{kDefaultThinkOpen};
  std::string close{kDefaultThinkClose};

  void validate() const {
    if (open.empty() || close.empty())
      throw InvalidArgument("think delimiters must be non-empty");
    if (open == close)
      throw InvalidArgument("think delimiters must be distinct");
  }
};

/// One candidate reasoning chain from the draft backend.
struct CotDraft {
  int index = 0;  // 1..n
  std::string text;
  std::int64_t token_count = 0;
  double latency_ms = 0.0;
  bool truncated = false;

  bool operator==(const CotDraft&) const = default;
};

struct SelectionOutcome {
  int chosen_index = 0;              // 1..n+1
  std::map<int, double> scores;      // may be partial
  double latency_ms = 0.0;
  bool fallback_used = false;

  bool operator==(const SelectionOutcome&) const = default;
};

enum class CotSourceKind { DraftAccepted, TargetRethink, VanillaTarget };

struct CotSource {
  CotSourceKind kind = CotSourceKind::VanillaTarget;
  int draft_index = 0;  // set only for DraftAccepted

  static CotSource accepted(int index) {
    return {CotSourceKind::DraftAccepted, index};
  }
  static CotSource rethink() { return {CotSourceKind::TargetRethink, 0}; }
  static CotSource vanilla() { return {CotSourceKind::VanillaTarget, 0}; }

  bool operator==(const CotSource&) const = default;
};

struct StageLatencies {
  double drafting_ms = 0.0;
  double selection_ms = 0.0;
  double target_thinking_ms = 0.0;
  double answering_ms = 0.0;

  /// CoT latency: everything except the answer phase.
  double reasoning_ms() const {
    return drafting_ms + selection_ms + target_thinking_ms;
  }
  double sum_ms() const { return reasoning_ms() + answering_ms; }

  bool operator==(const StageLatencies&) const = default;
};

enum class RunMode { Vanilla, SCoT };

inline std::string_view to_string(RunMode m) {
  return m == RunMode::SCoT ? "scot" : "vanilla";
}

/// Full per-question record of one pipeline run.
struct ReasoningTrace {
  std::string question_id;
  std::string dataset;
  RunMode mode = RunMode::SCoT;
  int n = 0;  // drafts requested (0 in vanilla mode)
  std::vector<CotDraft> drafts;
  std::optional<SelectionOutcome> selection;
  CotSource cot_source;
  std::string final_cot;
  std::string answer_text;
  std::optional<std::string> extracted_answer;
  std::int64_t l_M = 0;
  std::int64_t l_Md = 0;
  std::int64_t answer_tokens = 0;
  StageLatencies stage_latencies_ms;
  double total_latency_ms = 0.0;
  std::optional<bool> correct;
  std::optional<std::string> failure;  // set when the question was aborted

  bool ok() const { return !failure.has_value(); }
  bool operator==(const ReasoningTrace&) const = default;
};

struct LatencyFractions {
  double target = 0.0;
  double draft = 0.0;
  double selection = 0.0;
};

struct RunReport {
  std::string dataset;
  RunMode mode = RunMode::SCoT;
  std::int64_t num_questions = 0;
  std::int64_t num_failed = 0;
  std::int64_t num_graded = 0;
  double accuracy = 0.0;
  double mean_latency_s = 0.0;
  double mean_l_M = 0.0;
  double mean_l_Md = 0.0;
  double mean_answer_tokens = 0.0;
  std::optional<double> speedup_r;
  std::optional<double> throughput_ratio;  // r'
  double throughput_s = 0.0;
  std::optional<LatencyFractions> latency_fractions;
};

// ---------------------------------------------------------------------------
// Think-block extraction

struct ThinkBlock {
  std::string cot;
  std::string remainder;
  bool closed = false;

  bool operator==(const ThinkBlock&) const = default;
};

/// Splits `raw` at the first open delimiter and the first close delimiter
/// after it. Total: a missing open delimiter yields an empty cot and the whole
/// input as remainder; a missing close delimiter yields closed = false.
inline ThinkBlock extract_think_block(std::string_view raw,
                                      std::string_view open_delim,
                                      std::string_view close_delim) {
  if (open_delim.empty() || close_delim.empty() || open_delim == close_delim)
    throw InvalidArgument("think delimiters must be non-empty and distinct");

  const auto open = raw.find(open_delim);
  if (open == std::string_view::npos) return {"", std::string(raw), false};

  const auto body = open + open_delim.size();
  const auto close = raw.find(close_delim, body);
  if (close == std::string_view::npos)
    return {std::string(raw.substr(body)), "", false};

  return {std::string(raw.substr(body, close - body)),
          std::string(raw.substr(close + close_delim.size())), true};
}

/// Reads the chain of thought out of a generation that was asked to stop at
/// the close delimiter. Chat templates often inject the open delimiter into
/// the prompt, so text without one is treated as already inside the block.
/// `stopped` is true when the backend ended on a stop sequence.
inline ThinkBlock split_generated_cot(std::string_view text,
                                      const ThinkDelimiters& delims,
                                      bool stopped) {
  if (text.find(delims.open) != std::string_view::npos) {
    auto block = extract_think_block(text, delims.open, delims.close);
    block.closed = block.closed || stopped;
    return block;
  }
  const auto close = text.find(delims.close);
  if (close == std::string_view::npos) return {std::string(text), "", stopped};
  return {std::string(text.substr(0, close)),
          std::string(text.substr(close + delims.close.size())), true};
}

}  // namespace scot
