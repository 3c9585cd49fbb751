#pragma once

// Efficiency and accuracy metrics computed from trace lists.

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scot/core.hpp"

namespace scot {

/// Mean vanilla reasoning latency over mean SCoT reasoning latency.
inline double speedup_ratio(double vanilla_mean_t_s, double scot_mean_t_s) {
  if (!(vanilla_mean_t_s > 0.0) || !(scot_mean_t_s > 0.0))
    throw NonPositiveLatency("speed-up ratio needs positive latencies");
  return vanilla_mean_t_s / scot_mean_t_s;
}

/// Half-away-from-zero rounding to `decimals` places, as reported in tables.
inline double round_to(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(x * scale) / scale;
}

inline double throughput(std::int64_t valid_tokens, double wall_time_s) {
  if (!(wall_time_s > 0.0))
    throw NonPositiveTime("throughput needs a positive time window");
  if (valid_tokens < 0) throw InvalidArgument("valid_tokens must be >= 0");
  return static_cast<double>(valid_tokens) / wall_time_s;
}

/// Tokens that survive into the output of the reasoning phase. Rejected
/// sibling drafts are excluded; the selection step contributes one token.
inline std::int64_t valid_tokens(const ReasoningTrace& t) {
  switch (t.cot_source.kind) {
    case CotSourceKind::VanillaTarget:
      return t.l_M;
    case CotSourceKind::TargetRethink:
      return t.l_M + (t.selection ? 1 : 0);
    case CotSourceKind::DraftAccepted: {
      const auto i = static_cast<std::size_t>(t.cot_source.draft_index);
      const auto accepted = i >= 1 && i <= t.drafts.size()
                                ? t.drafts[i - 1].token_count
                                : std::int64_t{0};
      return accepted + 1;
    }
  }
  return 0;
}

namespace detail {

inline std::vector<const ReasoningTrace*> successful(
    const std::vector<ReasoningTrace>& traces) {
  std::vector<const ReasoningTrace*> out;
  for (const auto& t : traces)
    if (t.ok()) out.push_back(&t);
  return out;
}

}  // namespace detail

/// Share of total reasoning latency (answer phase excluded) spent in target
/// thinking, drafting and selection.
inline LatencyFractions latency_decomposition(
    const std::vector<ReasoningTrace>& traces) {
  if (traces.empty()) throw EmptyTraceSet();
  double target = 0, draft = 0, selection = 0;
  for (const auto* t : detail::successful(traces)) {
    if (t->mode != RunMode::SCoT)
      throw ModeMismatch("latency decomposition needs SCoT traces");
    target += t->stage_latencies_ms.target_thinking_ms;
    draft += t->stage_latencies_ms.drafting_ms;
    selection += t->stage_latencies_ms.selection_ms;
  }
  const double total = target + draft + selection;
  if (!(total > 0.0)) throw NonPositiveTime("no reasoning latency recorded");
  return {target / total, draft / total, selection / total};
}

struct SelectionEvalRecord {
  std::set<int> label_set;
  int chosen_index = 0;
  int n = 0;
};

struct SelectionAccuracy {
  double class1 = 0.0;
  double class2 = 0.0;
  std::int64_t class1_count = 0;
  std::int64_t class2_count = 0;
  std::int64_t class1_correct = 0;
  std::int64_t class2_correct = 0;
};

/// Class 1: some draft was correct (label set differs from {n+1}); right when
/// the chosen index is in the label set. Class 2: label set is {n+1}; right
/// when n+1 was chosen.
inline SelectionAccuracy selection_accuracy_by_class(
    const std::vector<SelectionEvalRecord>& records) {
  SelectionAccuracy acc;
  for (const auto& r : records) {
    if (r.label_set.empty()) throw InvalidArgument("label_set must be non-empty");
    const bool class2 = r.label_set == std::set<int>{r.n + 1};
    if (class2) {
      ++acc.class2_count;
      acc.class2_correct += r.chosen_index == r.n + 1 ? 1 : 0;
    } else {
      ++acc.class1_count;
      acc.class1_correct += r.label_set.contains(r.chosen_index) ? 1 : 0;
    }
  }
  if (acc.class1_count > 0)
    acc.class1 = static_cast<double>(acc.class1_correct) /
                 static_cast<double>(acc.class1_count);
  if (acc.class2_count > 0)
    acc.class2 = static_cast<double>(acc.class2_correct) /
                 static_cast<double>(acc.class2_count);
  return acc;
}

/// Fills a RunReport from one run's traces; r and r' appear only when a
/// vanilla run over the same dataset is supplied.
inline RunReport aggregate(
    const std::vector<ReasoningTrace>& traces,
    const std::vector<ReasoningTrace>* paired_vanilla = nullptr) {
  if (traces.empty()) throw EmptyTraceSet();
  RunReport r;
  r.dataset = traces.front().dataset;
  r.mode = traces.front().mode;
  for (const auto& t : traces) {
    if (t.dataset != r.dataset)
      throw MixedDatasets("traces mix datasets '" + r.dataset + "' and '" +
                          t.dataset + "'");
    if (t.mode != r.mode) throw ModeMismatch("traces mix run modes");
  }
  r.num_questions = static_cast<std::int64_t>(traces.size());

  std::int64_t correct = 0, valid = 0;
  double reasoning_ms = 0, l_m = 0, l_md = 0, answer = 0;
  const auto ok = detail::successful(traces);
  r.num_failed = r.num_questions - static_cast<std::int64_t>(ok.size());
  for (const auto& t : traces) {
    if (t.correct) {
      ++r.num_graded;
      correct += *t.correct ? 1 : 0;
    } else if (!t.ok()) {
      ++r.num_graded;  // aborted questions count as wrong
    }
  }
  for (const auto* t : ok) {
    reasoning_ms += t->stage_latencies_ms.reasoning_ms();
    l_m += static_cast<double>(t->l_M);
    l_md += static_cast<double>(t->l_Md);
    answer += static_cast<double>(t->answer_tokens);
    valid += valid_tokens(*t);
  }
  if (r.num_graded > 0)
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.num_graded);
  if (!ok.empty()) {
    const auto count = static_cast<double>(ok.size());
    r.mean_latency_s = reasoning_ms / count / 1000.0;
    r.mean_l_M = l_m / count;
    r.mean_l_Md = l_md / count;
    r.mean_answer_tokens = answer / count;
    if (reasoning_ms > 0) r.throughput_s = throughput(valid, reasoning_ms / 1000.0);
  }
  if (r.mode == RunMode::SCoT && reasoning_ms > 0)
    r.latency_fractions = latency_decomposition(traces);

  if (paired_vanilla) {
    const auto base = aggregate(*paired_vanilla);
    if (base.mode != RunMode::Vanilla)
      throw ModeMismatch("paired baseline traces must be vanilla");
    if (base.dataset != r.dataset)
      throw MixedDatasets("paired baseline is for dataset '" + base.dataset +
                          "', not '" + r.dataset + "'");
    r.speedup_r = speedup_ratio(base.mean_latency_s, r.mean_latency_s);
    if (base.throughput_s > 0) r.throughput_ratio = r.throughput_s / base.throughput_s;
  }
  return r;
}

}  // namespace scot
