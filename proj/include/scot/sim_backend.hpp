#pragma once

// Deterministic simulated backend for desk-scale runs.
//
// Every response is a pure function of (prompt, seed): no clock, no global
// RNG, no state. Durations are modeled as token_count / token_rate_tps.
//
// The simulated "world": each question (first line of the user prompt) has a
// reference answer derived from its hash. A generated chain of thought is
// sound with probability p_correct (p_correct_hard when the question carries
// the hard marker) and ends in "So the answer is N."; sound chains carry the
// reference answer, flawed ones a nearby wrong value. The selector reads the
// verdict tags of the options in a rendered selection prompt and chooses with
// configured per-class accuracies.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "scot/backend.hpp"
#include "scot/core.hpp"

namespace scot {

namespace sim {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnvOffset) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent pseudo-random stream `salt` derived from `key`.
inline std::uint64_t stream(std::uint64_t key, std::uint64_t salt) {
  return mix(key ^ mix(salt));
}

inline double unit(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

inline std::int64_t uniform_int(std::uint64_t x, std::int64_t lo,
                                std::int64_t hi) {
  const auto width = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(x % width);
}

inline constexpr std::string_view kSound = "verdict=sound";
inline constexpr std::string_view kFlawed = "verdict=flawed";

inline std::string_view first_line(std::string_view s) {
  return s.substr(0, s.find('\n'));
}

inline std::int64_t reference_answer(std::string_view question_prompt) {
  return 10 + static_cast<std::int64_t>(fnv1a(first_line(question_prompt)) %
                                        990);
}

/// Last integer following "answer is " in `text`.
inline std::optional<std::int64_t> stated_answer(std::string_view text) {
  constexpr std::string_view kLead = "answer is ";
  const auto at = text.rfind(kLead);
  if (at == std::string_view::npos) return std::nullopt;
  auto p = at + kLead.size();
  bool neg = p < text.size() && text[p] == '-';
  if (neg) ++p;
  std::int64_t v = 0;
  std::size_t digits = 0;
  for (; p < text.size() && text[p] >= '0' && text[p] <= '9'; ++p, ++digits)
    v = v * 10 + (text[p] - '0');
  if (digits == 0) return std::nullopt;
  return neg ? -v : v;
}

}  // namespace sim

struct TokenRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

struct SimSelection {
  double forward_ms = 0.0;
  double class1_accuracy = 1.0;  // P(pick a sound draft | one exists)
  double class2_accuracy = 1.0;  // P(pick the special option | none sound)
  double peak = 0.6;             // probability mass on the chosen option
  int top_k = 0;                 // 0 reports every candidate
  bool logprobs = true;
  std::string special_text{kDefaultSpecialText};
};

struct ScriptedResponse {
  std::string contains;  // matched against user prompt and assistant prefix
  std::optional<std::int64_t> seed;
  std::string text;
  std::int64_t token_count = 0;
};

struct ScriptedDistribution {
  std::string contains;
  std::map<std::string, double> scores;
};

enum class SimFailureKind { Transport, Refused, Timeout, NoLogprobs };

struct SimFailure {
  std::string contains;
  std::optional<std::int64_t> seed;
  SimFailureKind kind = SimFailureKind::Transport;
};

struct SimScenario {
  std::string name;
  double token_rate_tps = 50.0;
  TokenRange cot_tokens{100, 300};
  TokenRange answer_tokens{20, 60};
  double p_correct = 0.8;
  double p_correct_hard = 0.0;
  std::string hard_marker = "[hard]";
  ThinkDelimiters delims;
  SimSelection selection;
  std::vector<ScriptedResponse> scripted;
  std::vector<ScriptedDistribution> scripted_distributions;
  std::vector<SimFailure> failures;
  std::optional<std::uint64_t> jitter_seed;
  double jitter_fraction = 0.1;
};

namespace detail {

using nlohmann::json;

template <class T>
T sim_get(const json& obj, std::string_view key, const std::string& path,
          T fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + "." + std::string(key), e.what());
  }
}

inline void sim_check_keys(const json& obj, const std::string& path,
                           std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [k, _] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || a == k;
    if (!known) throw ConfigError(path + "." + k, "unknown key");
  }
}

inline TokenRange sim_range(const json& obj, std::string_view key,
                            const std::string& path, TokenRange fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  const auto where = path + "." + std::string(key);
  if (!it->is_array() || it->size() != 2)
    throw ConfigError(where, "expected [lo, hi]");
  TokenRange r{(*it)[0].get<std::int64_t>(), (*it)[1].get<std::int64_t>()};
  if (r.lo < 0 || r.hi < r.lo) throw ConfigError(where, "need 0 <= lo <= hi");
  return r;
}

inline SimFailureKind sim_failure_kind(const std::string& s,
                                       const std::string& path) {
  if (s == "transport") return SimFailureKind::Transport;
  if (s == "refused") return SimFailureKind::Refused;
  if (s == "timeout") return SimFailureKind::Timeout;
  if (s == "no_logprobs") return SimFailureKind::NoLogprobs;
  throw ConfigError(path, "unknown failure kind '" + s + "'");
}

}  // namespace detail

inline SimScenario parse_sim_scenario(const nlohmann::json& j,
                                      const std::string& name) {
  using detail::sim_get;
  const std::string path = "scenarios." + name;
  detail::sim_check_keys(
      j, path,
      {"token_rate_tps", "cot_tokens", "answer_tokens", "p_correct",
       "p_correct_hard", "hard_marker", "think_open", "think_close",
       "selection", "scripted", "scripted_distributions", "failures",
       "jitter_seed", "jitter_fraction"});
  SimScenario s;
  s.name = name;
  s.token_rate_tps = sim_get(j, "token_rate_tps", path, s.token_rate_tps);
  if (!(s.token_rate_tps > 0))
    throw ConfigError(path + ".token_rate_tps", "must be positive");
  s.cot_tokens = detail::sim_range(j, "cot_tokens", path, s.cot_tokens);
  s.answer_tokens = detail::sim_range(j, "answer_tokens", path, s.answer_tokens);
  s.p_correct = sim_get(j, "p_correct", path, s.p_correct);
  s.p_correct_hard = sim_get(j, "p_correct_hard", path, s.p_correct_hard);
  s.hard_marker = sim_get(j, "hard_marker", path, s.hard_marker);
  s.delims.open = sim_get(j, "think_open", path, s.delims.open);
  s.delims.close = sim_get(j, "think_close", path, s.delims.close);
  s.delims.validate();

  if (auto it = j.find("selection"); it != j.end()) {
    const auto sp = path + ".selection";
    detail::sim_check_keys(*it, sp,
                           {"forward_ms", "class1_accuracy", "class2_accuracy",
                            "peak", "top_k", "logprobs", "special_text"});
    auto& sel = s.selection;
    sel.forward_ms = sim_get(*it, "forward_ms", sp, sel.forward_ms);
    sel.class1_accuracy = sim_get(*it, "class1_accuracy", sp, sel.class1_accuracy);
    sel.class2_accuracy = sim_get(*it, "class2_accuracy", sp, sel.class2_accuracy);
    sel.peak = sim_get(*it, "peak", sp, sel.peak);
    sel.top_k = sim_get(*it, "top_k", sp, sel.top_k);
    sel.logprobs = sim_get(*it, "logprobs", sp, sel.logprobs);
    sel.special_text = sim_get(*it, "special_text", sp, sel.special_text);
    if (!(sel.peak > 0.0 && sel.peak <= 1.0))
      throw ConfigError(sp + ".peak", "must be in (0, 1]");
  }
  if (auto it = j.find("scripted"); it != j.end()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& e = (*it)[i];
      const auto ep = path + ".scripted[" + std::to_string(i) + "]";
      detail::sim_check_keys(e, ep, {"contains", "seed", "text", "token_count"});
      ScriptedResponse r;
      r.contains = sim_get<std::string>(e, "contains", ep, "");
      if (e.contains("seed")) r.seed = e.at("seed").get<std::int64_t>();
      r.text = sim_get<std::string>(e, "text", ep, "");
      r.token_count = sim_get<std::int64_t>(e, "token_count", ep, 0);
      if (r.token_count < 0)
        throw ConfigError(ep + ".token_count", "must be >= 0");
      s.scripted.push_back(std::move(r));
    }
  }
  if (auto it = j.find("scripted_distributions"); it != j.end()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& e = (*it)[i];
      const auto ep = path + ".scripted_distributions[" + std::to_string(i) + "]";
      detail::sim_check_keys(e, ep, {"contains", "scores"});
      ScriptedDistribution d;
      d.contains = sim_get<std::string>(e, "contains", ep, "");
      d.scores = sim_get<std::map<std::string, double>>(e, "scores", ep, {});
      s.scripted_distributions.push_back(std::move(d));
    }
  }
  if (auto it = j.find("failures"); it != j.end()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& e = (*it)[i];
      const auto ep = path + ".failures[" + std::to_string(i) + "]";
      detail::sim_check_keys(e, ep, {"contains", "seed", "kind"});
      SimFailure f;
      f.contains = sim_get<std::string>(e, "contains", ep, "");
      if (e.contains("seed")) f.seed = e.at("seed").get<std::int64_t>();
      f.kind = detail::sim_failure_kind(
          sim_get<std::string>(e, "kind", ep, "transport"), ep + ".kind");
      s.failures.push_back(std::move(f));
    }
  }
  if (j.contains("jitter_seed"))
    s.jitter_seed = j.at("jitter_seed").get<std::uint64_t>();
  s.jitter_fraction = sim_get(j, "jitter_fraction", path, s.jitter_fraction);
  return s;
}

/// Scenario collection loaded from a sim script JSON file.
class SimScript {
 public:
  static constexpr int kSchemaVersion = 1;

  static SimScript parse(const nlohmann::json& j) {
    detail::sim_check_keys(j, "sim_script", {"schema_version", "scenarios"});
    const auto version = j.value("schema_version", kSchemaVersion);
    if (version != kSchemaVersion)
      throw ConfigError("schema_version",
                        "unsupported sim script version " +
                            std::to_string(version));
    SimScript script;
    const auto it = j.find("scenarios");
    if (it == j.end() || !it->is_object())
      throw ConfigError("scenarios", "missing scenario map");
    for (const auto& [name, body] : it->items())
      script.scenarios_.emplace(name, parse_sim_scenario(body, name));
    return script;
  }

  static SimScript load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("script", "cannot open sim script " + path);
    try {
      return parse(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("script", path + ": " + e.what());
    }
  }

  const SimScenario& scenario(const std::string& name) const {
    const auto it = scenarios_.find(name);
    if (it == scenarios_.end())
      throw ConfigError("scenario", "no scenario named '" + name + "'");
    return it->second;
  }

  void add(SimScenario s) {
    auto key = s.name;
    scenarios_.insert_or_assign(std::move(key), std::move(s));
  }

 private:
  std::map<std::string, SimScenario> scenarios_;
};

class SimBackend final : public Backend {
 public:
  explicit SimBackend(SimScenario scenario) : s_(std::move(scenario)) {
    if (!(s_.token_rate_tps > 0))
      throw InvalidArgument("token_rate_tps must be positive");
  }

  const SimScenario& scenario() const { return s_; }
  Timing timing() const override { return Timing::Virtual; }
  std::string name() const override { return "sim:" + s_.name; }

  Generation generate(const ChatPrompt& prompt,
                      const GenerationParams& params) override {
    require_prompt(prompt);
    params.validate();
    const auto seed = params.seed.value_or(0);
    check_failures(prompt, seed, /*distribution=*/false);

    const auto key = prompt_key(prompt);
    const auto rkey = sim::stream(key, static_cast<std::uint64_t>(seed));
    auto chunks = respond(prompt, seed, rkey);
    auto gen = realize(chunks, params);
    gen.prompt_tokens = static_cast<std::int64_t>(
        (prompt.user.size() + prompt.assistant_prefix.size() + 3) / 4);
    gen.duration_ms = static_cast<double>(gen.token_count) /
                      s_.token_rate_tps * 1000.0 * jitter(rkey);
    return gen;
  }

  TokenDistribution next_token_distribution(
      const ChatPrompt& prompt,
      std::span<const std::string> candidates) override {
    require_prompt(prompt);
    if (candidates.empty()) throw InvalidArgument("candidates must be non-empty");
    check_failures(prompt, 0, /*distribution=*/true);
    if (!s_.selection.logprobs)
      throw LogprobsUnsupported(name() + " reports no alternatives");

    TokenDistribution out;
    out.duration_ms = s_.selection.forward_ms;

    for (const auto& sd : s_.scripted_distributions) {
      if (!contains(prompt, sd.contains)) continue;
      for (const auto& c : candidates)
        if (auto it = sd.scores.find(c); it != sd.scores.end())
          out.scores.emplace(c, it->second);
      return out;
    }

    const auto m = static_cast<int>(candidates.size());
    const auto key = prompt_key(prompt);
    const int chosen = choose_option(prompt.user, m, key);
    // chosen first, then remaining options by ascending position
    std::vector<int> order{chosen};
    for (int i = 1; i <= m; ++i)
      if (i != chosen) order.push_back(i);
    const int keep = s_.selection.top_k > 0 ? std::min(s_.selection.top_k, m) : m;
    const double rest = m > 1 ? (1.0 - s_.selection.peak) / (m - 1) : 0.0;
    for (int r = 0; r < keep; ++r) {
      const int opt = order[static_cast<std::size_t>(r)];
      out.scores.emplace(candidates[static_cast<std::size_t>(opt - 1)],
                         opt == chosen ? (m > 1 ? s_.selection.peak : 1.0) : rest);
    }
    return out;
  }

  /// Option the simulated selector prefers among `option_count` options of a
  /// rendered selection prompt.
  int choose_option(std::string_view rendered, int option_count,
                    std::uint64_t key) const {
    const auto opts = parse_options(rendered, option_count);
    std::vector<int> sound, other, drafts;
    int special = 0;
    for (std::size_t i = 0; i < opts.size(); ++i) {
      const int idx = static_cast<int>(i) + 1;
      if (opts[i].special) {
        special = idx;
        other.push_back(idx);
      } else {
        drafts.push_back(idx);
        (opts[i].sound ? sound : other).push_back(idx);
      }
    }
    if (opts.empty()) return 1;
    const double u = sim::unit(sim::stream(key, 11));
    const auto pick = sim::stream(key, 12);
    auto any_of = [&](const std::vector<int>& v) {
      return v[static_cast<std::size_t>(pick % v.size())];
    };
    if (!sound.empty()) {
      if (u < s_.selection.class1_accuracy || other.empty()) return any_of(sound);
      return any_of(other);
    }
    if (special != 0 && (u < s_.selection.class2_accuracy || drafts.empty()))
      return special;
    return drafts.empty() ? 1 : any_of(drafts);
  }

 private:
  struct Chunk {
    std::string text;
    std::int64_t tokens = 0;
  };

  struct OptionView {
    bool sound = false;
    bool special = false;
  };

  static std::uint64_t prompt_key(const ChatPrompt& p) {
    return sim::fnv1a(p.assistant_prefix, sim::fnv1a("\x1f", sim::fnv1a(p.user)));
  }

  static bool contains(const ChatPrompt& p, std::string_view needle) {
    return p.user.find(needle) != std::string::npos ||
           p.assistant_prefix.find(needle) != std::string::npos;
  }

  void check_failures(const ChatPrompt& p, std::int64_t seed,
                      bool distribution) const {
    for (const auto& f : s_.failures) {
      if (!contains(p, f.contains)) continue;
      if (f.seed && (distribution || *f.seed != seed)) continue;
      switch (f.kind) {
        case SimFailureKind::Transport:
          throw TransportError(name() + ": simulated transport failure");
        case SimFailureKind::Refused:
          throw BackendRefused(name() + ": simulated refusal", 400);
        case SimFailureKind::Timeout:
          throw Timeout(name() + ": simulated timeout");
        case SimFailureKind::NoLogprobs:
          if (distribution)
            throw LogprobsUnsupported(name() + ": alternatives disabled");
          break;
      }
    }
  }

  bool is_selection_prompt(std::string_view user) const {
    return (!s_.selection.special_text.empty() &&
            user.find(s_.selection.special_text) != std::string_view::npos) ||
           user.find(sim::kSound) != std::string_view::npos ||
           user.find(sim::kFlawed) != std::string_view::npos;
  }

  /// Splits a rendered selection prompt into its numbered option segments.
  /// `count` <= 0 scans until a label is missing.
  std::vector<OptionView> parse_options(std::string_view text, int count) const {
    const int limit = count > 0 ? count : kMaxDraftCount + 1;
    std::vector<std::size_t> starts;
    std::size_t from = 0;
    for (int k = 1; k <= limit; ++k) {
      const auto label = "\n" + std::to_string(k) + ". ";
      const auto at = text.find(label, from);
      if (at == std::string_view::npos) break;
      starts.push_back(at + label.size());
      from = at + label.size();
    }
    std::vector<OptionView> out;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      const auto end = i + 1 < starts.size() ? starts[i + 1] : text.size();
      const auto seg = text.substr(starts[i], end - starts[i]);
      OptionView v;
      v.sound = seg.find(sim::kSound) != std::string_view::npos;
      v.special = !s_.selection.special_text.empty() &&
                  seg.substr(0, s_.selection.special_text.size()) ==
                      s_.selection.special_text;
      out.push_back(v);
    }
    return out;
  }

  std::vector<Chunk> respond(const ChatPrompt& p, std::int64_t seed,
                             std::uint64_t rkey) const {
    for (const auto& r : s_.scripted) {
      if (!contains(p, r.contains)) continue;
      if (r.seed && *r.seed != seed) continue;
      return {{r.text, r.token_count}};
    }

    if (p.assistant_prefix.empty() && is_selection_prompt(p.user)) {
      const int k = choose_option(p.user, 0, prompt_key(p));
      return {{"The answer is " + std::to_string(k), 4}};
    }

    const auto reference = sim::reference_answer(p.user);
    const auto wrong = reference + 1 +
                       static_cast<std::int64_t>(sim::stream(rkey, 3) % 9);
    const auto answer_tokens = sim::uniform_int(
        sim::stream(rkey, 4), s_.answer_tokens.lo, s_.answer_tokens.hi);

    if (p.assistant_prefix.find(s_.delims.close) != std::string::npos) {
      // answer phase: continue after a completed think block
      const auto stated = sim::stated_answer(p.assistant_prefix);
      const auto value = stated.value_or(wrong);
      return {{"The final answer is \\boxed{" + std::to_string(value) + "}.",
               answer_tokens}};
    }

    const bool hard = !s_.hard_marker.empty() &&
                      p.user.find(s_.hard_marker) != std::string::npos;
    const double p_ok = hard ? s_.p_correct_hard : s_.p_correct;
    const bool sound = sim::unit(sim::stream(rkey, 2)) < p_ok;
    const auto value = sound ? reference : wrong;
    const auto cot_tokens =
        sim::uniform_int(sim::stream(rkey, 1), s_.cot_tokens.lo, s_.cot_tokens.hi);

    std::string body = "Working through the problem step by step (" +
                       std::to_string(cot_tokens) + " tokens, " +
                       std::string(sound ? sim::kSound : sim::kFlawed) +
                       "). So the answer is " + std::to_string(value) + ".";
    std::string head =
        p.assistant_prefix.find(s_.delims.open) == std::string::npos
            ? s_.delims.open + body
            : body;
    if (cot_tokens == 0) head.clear();
    return {{std::move(head), cot_tokens},
            {s_.delims.close + "\n\nThe final answer is \\boxed{" +
                 std::to_string(value) + "}.",
             answer_tokens}};
  }

  /// Applies stop sequences, then the token cap, to a chunked response.
  static Generation realize(const std::vector<Chunk>& chunks,
                            const GenerationParams& params) {
    std::string full;
    for (const auto& c : chunks) full += c.text;

    std::size_t stop_at = full.size();
    for (const auto& s : params.stop_sequences) {
      if (s.empty()) continue;
      const auto at = full.find(s);
      if (at != std::string::npos && at < stop_at) {
        stop_at = at;
      }
    }

    std::vector<Chunk> kept;
    std::size_t offset = 0;
    for (const auto& c : chunks) {
      if (offset >= stop_at) break;
      const auto take = std::min(c.text.size(), stop_at - offset);
      if (take == c.text.size()) {
        kept.push_back(c);
      } else {
        const auto tokens = static_cast<std::int64_t>(
            static_cast<double>(c.tokens) * static_cast<double>(take) /
            static_cast<double>(c.text.size()));
        kept.push_back({c.text.substr(0, take), tokens});
      }
      offset += c.text.size();
    }

    Generation g;
    g.finish_reason = FinishReason::Stop;
    std::int64_t budget = params.max_new_tokens;
    for (const auto& c : kept) {
      if (c.tokens <= budget) {
        g.text += c.text;
        g.token_count += c.tokens;
        budget -= c.tokens;
        continue;
      }
      const auto chars = static_cast<std::size_t>(
          static_cast<double>(c.text.size()) * static_cast<double>(budget) /
          static_cast<double>(c.tokens));
      g.text += c.text.substr(0, chars);
      g.token_count += budget;
      g.finish_reason = FinishReason::LengthCap;
      break;
    }
    return g;
  }

  double jitter(std::uint64_t rkey) const {
    if (!s_.jitter_seed) return 1.0;
    const double u = sim::unit(sim::stream(rkey ^ *s_.jitter_seed, 99));
    return 1.0 + s_.jitter_fraction * (2.0 * u - 1.0);
  }

  SimScenario s_;
};

/// Synthetic question whose gold answer is the simulated world's reference.
inline Question make_sim_question(const std::string& dataset, std::size_t i,
                                  bool hard, const std::string& hard_marker = "[hard]") {
  Question q;
  q.id = dataset + "-" + std::to_string(i);
  q.text = "Synthetic problem " + std::to_string(i) + " of " + dataset +
           ": determine the hidden quantity." +
           (hard ? " " + hard_marker : std::string());
  q.gold_answer = std::to_string(sim::reference_answer(q.text));
  return q;
}

/// `count` synthetic questions with hard ones spread evenly so that exactly
/// round(count * hard_fraction) are hard.
inline std::vector<Question> make_sim_dataset(const std::string& dataset,
                                              std::size_t count,
                                              double hard_fraction,
                                              const std::string& hard_marker = "[hard]") {
  std::vector<Question> out;
  out.reserve(count);
  const auto total_hard = static_cast<std::int64_t>(
      std::llround(static_cast<double>(count) * hard_fraction));
  for (std::size_t i = 0; i < count; ++i) {
    const auto before = static_cast<std::int64_t>(i) * total_hard /
                        static_cast<std::int64_t>(count);
    const auto after = static_cast<std::int64_t>(i + 1) * total_hard /
                       static_cast<std::int64_t>(count);
    out.push_back(make_sim_question(dataset, i, after > before, hard_marker));
  }
  return out;
}

}  // namespace scot
