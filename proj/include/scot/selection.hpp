#pragma once

// Selection template rendering, single-step constrained selection and the
// accept-or-rethink decision.

#include <cctype>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scot/backend.hpp"
#include "scot/core.hpp"

namespace scot {

/// Version 1 of the selection template. Must stay byte-identical to
/// resources/selection_template_v1.txt; selector fine-tuning data depends on
/// it matching inference-time prompts.
inline constexpr std::string_view kSelectionTemplateV1 =
    "You are given a question and several candidate reasoning paths for it. "
    "Some of the paths may contain mistakes.\n"
    "Select the reasoning path that correctly solves the question and reply "
    "with its index only, without any explanation.\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Reasoning paths:\n"
    "{options}\n"
    "\n"
    "Reply with the index of the best reasoning path only.\n";

class SelectionTemplate {
 public:
  static constexpr std::string_view kQuestion = "{question}";
  static constexpr std::string_view kOptions = "{options}";

  /// Throws InvalidArgument unless each placeholder occurs exactly once.
  static SelectionTemplate from_text(std::string text) {
    for (auto ph : {kQuestion, kOptions}) {
      const auto first = text.find(ph);
      if (first == std::string::npos ||
          text.find(ph, first + 1) != std::string::npos)
        throw InvalidArgument("selection template needs exactly one " +
                              std::string(ph));
    }
    SelectionTemplate t;
    t.text_ = std::move(text);
    return t;
  }

  static SelectionTemplate load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open selection template " + path);
    return from_text(std::string(std::istreambuf_iterator<char>(in), {}));
  }

  static const SelectionTemplate& v1() {
    static const SelectionTemplate t = from_text(std::string(kSelectionTemplateV1));
    return t;
  }

  const std::string& text() const { return text_; }

  /// Single pass: placeholder-like text inside the substituted values is
  /// never expanded again.
  std::string render(std::string_view question, std::string_view options) const {
    std::string out;
    out.reserve(text_.size() + question.size() + options.size());
    std::size_t pos = 0;
    while (pos < text_.size()) {
      if (text_.compare(pos, kQuestion.size(), kQuestion) == 0) {
        out += question;
        pos += kQuestion.size();
      } else if (text_.compare(pos, kOptions.size(), kOptions) == 0) {
        out += options;
        pos += kOptions.size();
      } else {
        out += text_[pos++];
      }
    }
    return out;
  }

 private:
  std::string text_;
};

struct SelectionPrompt {
  std::string rendered;
  int n = 0;                               // drafts listed
  std::vector<std::string> option_labels;  // "1".."n" plus "n+1" if special
  bool has_special = false;

  int option_count() const { return static_cast<int>(option_labels.size()); }
};

/// Renders the selection prompt. `special_text` = nullopt drops the
/// all-wrong option (no error correction).
inline SelectionPrompt render_selection_prompt(
    std::string_view question, const std::vector<CotDraft>& drafts,
    const std::optional<std::string>& special_text =
        std::string(kDefaultSpecialText),
    const SelectionTemplate& tmpl = SelectionTemplate::v1()) {
  if (drafts.empty()) throw EmptyDraftSet();
  for (std::size_t i = 0; i < drafts.size(); ++i)
    if (drafts[i].index != static_cast<int>(i) + 1)
      throw InvalidArgument("draft indices must be contiguous from 1");

  SelectionPrompt p;
  p.n = static_cast<int>(drafts.size());
  if (p.n + (special_text ? 1 : 0) > kMaxDraftCount + 1)
    throw InvalidArgument("too many options for single-digit labels");

  std::string options;
  auto add = [&](int label, std::string_view text) {
    if (!options.empty()) options += "\n\n";
    options += std::to_string(label);
    options += ". ";
    options += text;
    p.option_labels.push_back(std::to_string(label));
  };
  for (const auto& d : drafts) add(d.index, d.text);
  if (special_text) {
    add(p.n + 1, *special_text);
    p.has_special = true;
  }
  p.rendered = tmpl.render(question, options);
  return p;
}

/// Lowest index attaining the maximum score; 0 for an empty map.
inline int argmax_lowest_index(const std::map<int, double>& scores) {
  int best = 0;
  double best_score = 0.0;
  for (const auto& [idx, score] : scores) {
    if (best == 0 || score > best_score) {
      best = idx;
      best_score = score;
    }
  }
  return best;
}

/// First integer in [1, max_option] appearing in `text`, or 0.
inline int parse_option_index(std::string_view text, int max_option) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    long long v = 0;
    std::size_t j = i;
    for (; j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]));
         ++j)
      v = std::min<long long>(v * 10 + (text[j] - '0'), 1'000'000);
    if (v >= 1 && v <= max_option) return static_cast<int>(v);
    i = j;
  }
  return 0;
}

inline constexpr std::int64_t kFallbackMaxTokens = 4;

/// One constrained forward step over the option labels; argmax with lowest
/// index on ties. Falls back to parsing a short generation when the backend
/// has no alternatives or none of the labels made its top-k.
inline SelectionOutcome select_draft(const SelectionPrompt& prompt,
                                     Backend& selector,
                                     std::int64_t fallback_max_tokens =
                                         kFallbackMaxTokens) {
  if (prompt.option_labels.empty()) throw EmptyDraftSet();
  const ChatPrompt chat{prompt.rendered, ""};

  SelectionOutcome out;
  try {
    const auto dist =
        selector.next_token_distribution(chat, prompt.option_labels);
    out.latency_ms = dist.duration_ms;
    for (std::size_t i = 0; i < prompt.option_labels.size(); ++i) {
      const auto it = dist.scores.find(prompt.option_labels[i]);
      if (it != dist.scores.end())
        out.scores.emplace(static_cast<int>(i) + 1, it->second);
    }
    if (!out.scores.empty()) {
      out.chosen_index = argmax_lowest_index(out.scores);
      return out;
    }
  } catch (const LogprobsUnsupported&) {
  }

  GenerationParams params;
  params.temperature = 0.0;
  params.max_new_tokens = std::min<std::int64_t>(fallback_max_tokens, 4);
  const auto gen = selector.generate(chat, params);
  out.latency_ms += gen.duration_ms;
  out.fallback_used = true;
  out.chosen_index = parse_option_index(gen.text, prompt.option_count());
  if (out.chosen_index == 0)
    throw SelectionFailed(
        "no option index in selector output '" + gen.text + "'", out.latency_ms);
  return out;
}

struct UseDraft {
  int index = 0;
  bool operator==(const UseDraft&) const = default;
};
struct Rethink {
  bool operator==(const Rethink&) const = default;
};
using Decision = std::variant<UseDraft, Rethink>;

inline Decision decide(const SelectionOutcome& outcome, int n) {
  if (outcome.chosen_index < 1 || outcome.chosen_index > n + 1)
    throw InvalidArgument("chosen index " +
                          std::to_string(outcome.chosen_index) +
                          " outside 1.." + std::to_string(n + 1));
  if (outcome.chosen_index == n + 1) return Rethink{};
  return UseDraft{outcome.chosen_index};
}

}  // namespace scot
