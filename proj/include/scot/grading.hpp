#pragma once

// Math-QA answer extraction, normalization and equivalence.

#include <cctype>
#include <cstdint>
#include <numeric>
#include <optional>
#include <regex>
#include <string>
#include <string_view>

#include "scot/errors.hpp"

namespace scot {

/// Content of the last \boxed{...} (else \fbox{...}) with balanced braces.
inline std::optional<std::string> last_boxed(std::string_view text) {
  for (std::string_view tag : {"\\boxed{", "\\fbox{"}) {
    std::optional<std::string> last;
    for (auto at = text.find(tag); at != std::string_view::npos;
         at = text.find(tag, at + 1)) {
      int depth = 1;
      std::size_t i = at + tag.size();
      for (; i < text.size() && depth > 0; ++i) {
        if (text[i] == '{') ++depth;
        if (text[i] == '}') --depth;
      }
      if (depth == 0)
        last = std::string(text.substr(at + tag.size(), i - 1 - at - tag.size()));
    }
    if (last) return last;
  }
  return std::nullopt;
}

/// Last number-like token: integers with optional thousands separators,
/// decimals and simple fractions a/b.
inline std::optional<std::string> last_number(std::string_view text) {
  static const std::regex kNumber(
      R"(-?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?(?:/\d+)?|-?\.\d+)");
  std::optional<std::string> last;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kNumber);
       it != std::sregex_iterator(); ++it)
    last = it->str();
  return last;
}

/// Candidate answer: last boxed expression if any, else last number.
inline std::optional<std::string> extract_answer(std::string_view text) {
  if (auto boxed = last_boxed(text)) return boxed;
  return last_number(text);
}

namespace detail {

inline void replace_all(std::string& s, std::string_view from,
                        std::string_view to) {
  if (from.empty()) return;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

/// Reads a brace group starting at s[pos] == '{'; returns content and moves
/// pos past the closing brace.
inline std::optional<std::string> brace_group(const std::string& s,
                                              std::size_t& pos) {
  if (pos >= s.size() || s[pos] != '{') return std::nullopt;
  int depth = 0;
  for (std::size_t i = pos; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) {
      auto inner = s.substr(pos + 1, i - pos - 1);
      pos = i + 1;
      return inner;
    }
  }
  return std::nullopt;
}

inline std::string rewrite_fracs(std::string s) {
  std::size_t at;
  while ((at = s.find("\\frac")) != std::string::npos) {
    std::size_t pos = at + 5;
    auto num = brace_group(s, pos);
    auto den = num ? brace_group(s, pos) : std::nullopt;
    if (!num || !den) break;
    s.replace(at, pos - at, *num + "/" + *den);
  }
  return s;
}

inline std::string unwrap_text(std::string s) {
  for (std::string_view cmd : {"\\text", "\\mathrm", "\\mbox"}) {
    std::size_t at;
    while ((at = s.find(cmd)) != std::string::npos) {
      std::size_t pos = at + cmd.size();
      auto inner = brace_group(s, pos);
      if (!inner) {
        s.erase(at, cmd.size());
        continue;
      }
      s.replace(at, pos - at, *inner);
    }
  }
  return s;
}

inline bool is_plain_number(std::string_view s) {
  static const std::regex kPlain(R"(-?(\d+(\.\d*)?|\.\d+)(/\d+)?)");
  return std::regex_match(s.begin(), s.end(), kPlain);
}

inline std::string trim_decimal(std::string s) {
  const auto dot = s.find('.');
  if (dot == std::string::npos) return s;
  auto end = s.find('/', dot);
  if (end == std::string::npos) end = s.size();
  auto last = end;
  while (last > dot + 1 && s[last - 1] == '0') --last;
  if (last == dot + 1) last = dot;  // "3." or "3.000" -> "3"
  s.erase(last, end - last);
  if (!s.empty() && s[0] == '.') s.insert(0, "0");
  if (s.size() > 1 && s[0] == '-' && s[1] == '.') s.insert(1, "0");
  return s;
}

}  // namespace detail

/// Canonical textual form of an answer. Idempotent.
inline std::string normalize_answer(std::string_view raw) {
  std::string s(raw);
  if (auto boxed = last_boxed(s)) s = *boxed;
  for (std::string_view junk :
       {"\\left", "\\right", "\\!", "\\,", "\\;", "\\ ", "^\\circ", "^{\\circ}",
        "\\%", "%", "\\$", "$", "\\displaystyle"})
    detail::replace_all(s, junk, "");
  detail::replace_all(s, "\\dfrac", "\\frac");
  detail::replace_all(s, "\\tfrac", "\\frac");
  s = detail::unwrap_text(s);
  s = detail::rewrite_fracs(s);

  std::string compact;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) compact += c;
  s = std::move(compact);
  while (!s.empty() && s.back() == '.') s.pop_back();
  if (!s.empty() && s.front() == '+') s.erase(0, 1);

  // thousands separators in numbers
  std::string no_commas;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == ',' && i > 0 && i + 1 < s.size() &&
        std::isdigit(static_cast<unsigned char>(s[i - 1])) &&
        std::isdigit(static_cast<unsigned char>(s[i + 1])))
      continue;
    no_commas += s[i];
  }
  s = std::move(no_commas);

  // lone "{x}" braces
  while (s.size() >= 2 && s.front() == '{' && s.back() == '}') {
    std::size_t pos = 0;
    auto inner = detail::brace_group(s, pos);
    if (!inner || pos != s.size()) break;
    s = *inner;
  }
  if (detail::is_plain_number(s)) s = detail::trim_decimal(s);
  return s;
}

/// Exact rational p/q with q > 0, in lowest terms.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
  bool operator==(const Rational&) const = default;
};

/// Parses an integer, terminating decimal or a/b; nullopt otherwise or on
/// overflow.
inline std::optional<Rational> parse_rational(std::string_view s) {
  if (s.empty()) return std::nullopt;
  bool neg = false;
  if (s.front() == '-') {
    neg = true;
    s.remove_prefix(1);
  }
  auto parse_decimal = [](std::string_view t) -> std::optional<Rational> {
    if (t.empty()) return std::nullopt;
    std::int64_t num = 0, den = 1;
    bool seen_dot = false, any_digit = false;
    for (char c : t) {
      if (c == '.') {
        if (seen_dot) return std::nullopt;
        seen_dot = true;
        continue;
      }
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
      any_digit = true;
      if (num > (INT64_MAX - 9) / 10) return std::nullopt;
      num = num * 10 + (c - '0');
      if (seen_dot) {
        if (den > INT64_MAX / 10) return std::nullopt;
        den *= 10;
      }
    }
    if (!any_digit) return std::nullopt;
    return Rational{num, den};
  };

  Rational r;
  if (const auto slash = s.find('/'); slash != std::string_view::npos) {
    auto a = parse_decimal(s.substr(0, slash));
    auto b = parse_decimal(s.substr(slash + 1));
    if (!a || !b || b->num == 0) return std::nullopt;
    const __int128 n = static_cast<__int128>(a->num) * b->den;
    const __int128 d = static_cast<__int128>(a->den) * b->num;
    if (n > INT64_MAX || d > INT64_MAX) return std::nullopt;
    r = {static_cast<std::int64_t>(n), static_cast<std::int64_t>(d)};
  } else {
    auto a = parse_decimal(s);
    if (!a) return std::nullopt;
    r = *a;
  }
  const auto g = std::gcd(r.num, r.den);
  if (g > 1) {
    r.num /= g;
    r.den /= g;
  }
  if (neg) r.num = -r.num;
  return r;
}

/// Both sides normalized; equal if textually identical or equal as exact
/// rationals (so "1/2" matches "0.5").
inline bool answers_equivalent(std::string_view a, std::string_view b) {
  const auto na = normalize_answer(a);
  const auto nb = normalize_answer(b);
  if (na == nb) return !na.empty();
  const auto ra = parse_rational(na);
  const auto rb = parse_rational(nb);
  return ra && rb && *ra == *rb;
}

/// Reference answers may arrive in GSM8K form ("... #### 42").
inline std::string gold_answer_core(std::string_view gold) {
  if (const auto at = gold.rfind("####"); at != std::string_view::npos)
    gold = gold.substr(at + 4);
  if (auto boxed = last_boxed(gold)) return *boxed;
  return std::string(gold);
}

struct GradeResult {
  bool correct = false;
  std::optional<std::string> extracted;  // nullopt: no answer found
};

inline GradeResult grade(std::string_view answer_text, std::string_view gold) {
  const auto core = gold_answer_core(gold);
  if (normalize_answer(core).empty())
    throw InvalidArgument("gold answer must be non-empty");
  GradeResult r;
  r.extracted = extract_answer(answer_text);
  r.correct = r.extracted && answers_equivalent(*r.extracted, core);
  return r;
}

inline bool grade_answer(std::string_view answer_text, std::string_view gold) {
  return grade(answer_text, gold).correct;
}

}  // namespace scot
