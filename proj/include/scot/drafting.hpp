#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <future>
#include <string>
#include <vector>

#include "scot/backend.hpp"
#include "scot/core.hpp"

namespace scot {

/// A draft that could not be produced; its slot holds an empty, truncated
/// draft so the index set stays contiguous.
struct DraftingFailure {
  int index = 0;
  std::string cause;
};

struct DraftSet {
  std::vector<CotDraft> drafts;  // indices 1..n in order
  std::vector<DraftingFailure> failures;
  double elapsed_ms = 0.0;  // fan-out wall clock (virtual backends: max draft)
};

inline std::int64_t longest_draft_tokens(const std::vector<CotDraft>& drafts) {
  std::int64_t longest = 0;
  for (const auto& d : drafts) longest = std::max(longest, d.token_count);
  return longest;
}

inline void require_draft_count(int n) {
  if (n < 1 || n > kMaxDraftCount)
    throw InvalidArgument("draft count must be in 1.." +
                          std::to_string(kMaxDraftCount) + ", got " +
                          std::to_string(n));
}

/// Draft `n` chains for `prompt` concurrently on `backend`. Draft i runs with
/// seed base + i, where base is params.seed (0 when unset), and stops at the
/// close delimiter. Throws AllDraftsFailed only when every request fails.
inline DraftSet draft_chains(const ChatPrompt& prompt, int n,
                             const GenerationParams& params, Backend& backend,
                             const ThinkDelimiters& delims = {}) {
  require_draft_count(n);
  require_prompt(prompt);
  params.validate();
  delims.validate();

  const auto base_seed = params.seed.value_or(0);
  const auto started = std::chrono::steady_clock::now();

  std::vector<std::future<Generation>> pending;
  pending.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    auto p = params;
    p.seed = base_seed + i;
    if (std::find(p.stop_sequences.begin(), p.stop_sequences.end(),
                  delims.close) == p.stop_sequences.end())
      p.stop_sequences.push_back(delims.close);
    pending.push_back(std::async(std::launch::async,
                                 [&backend, &prompt, p = std::move(p)] {
                                   return backend.generate(prompt, p);
                                 }));
  }

  DraftSet set;
  set.drafts.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    CotDraft d;
    d.index = i;
    try {
      const auto gen = pending[static_cast<std::size_t>(i - 1)].get();
      const auto block = split_generated_cot(
          gen.text, delims, gen.finish_reason == FinishReason::Stop);
      d.text = block.cot;
      d.token_count = gen.token_count;
      d.latency_ms = gen.duration_ms;
      d.truncated = gen.finish_reason == FinishReason::LengthCap || !block.closed;
      if (d.token_count == 0) d.text.clear();
    } catch (const Error& e) {
      d.truncated = true;
      set.failures.push_back({i, e.what()});
    }
    set.drafts.push_back(std::move(d));
  }

  if (static_cast<int>(set.failures.size()) == n)
    throw AllDraftsFailed("all " + std::to_string(n) +
                          " drafts failed; first cause: " +
                          set.failures.front().cause);

  if (backend.timing() == Timing::Virtual) {
    for (const auto& d : set.drafts)
      set.elapsed_ms = std::max(set.elapsed_ms, d.latency_ms);
  } else {
    set.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - started)
                         .count();
  }
  return set;
}

}  // namespace scot
