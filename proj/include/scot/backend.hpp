#pragma once

// Uniform model-backend abstraction. Concrete backends: SimBackend
// (sim_backend.hpp) and HttpBackend (http_backend.hpp).

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <thread>
#include <utility>

#include "scot/core.hpp"
#include "scot/errors.hpp"

namespace scot {

enum class FinishReason { Stop, LengthCap };

/// A single-turn chat prompt. A non-empty `assistant_prefix` is placed in the
/// assistant turn and the backend continues it.
struct ChatPrompt {
  std::string user;
  std::string assistant_prefix;
};

struct Generation {
  std::string text;
  std::int64_t token_count = 0;
  std::int64_t prompt_tokens = 0;
  double duration_ms = 0.0;
  FinishReason finish_reason = FinishReason::Stop;

  bool operator==(const Generation&) const = default;
};

struct TokenDistribution {
  std::map<std::string, double> scores;  // candidate -> probability-like score
  double duration_ms = 0.0;
};

/// Virtual backends report modeled durations instead of wall time; the
/// pipeline then accounts stages from those numbers.
enum class Timing { WallClock, Virtual };

class Backend {
 public:
  virtual ~Backend() = default;

  virtual Generation generate(const ChatPrompt& prompt,
                              const GenerationParams& params) = 0;

  /// One forward step. Returns scores only for candidates present in the
  /// backend's top alternatives; absent candidates are omitted.
  virtual TokenDistribution next_token_distribution(
      const ChatPrompt& prompt, std::span<const std::string> candidates) = 0;

  virtual Timing timing() const { return Timing::WallClock; }
  virtual std::string name() const = 0;
};

using BackendPtr = std::shared_ptr<Backend>;

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
  double backoff_multiplier = 2.0;
};

/// Retries TransportError with exponential backoff. BackendRefused, Timeout
/// and LogprobsUnsupported pass straight through.
class RetryingBackend final : public Backend {
 public:
  RetryingBackend(BackendPtr inner, RetryPolicy policy = {})
      : inner_(std::move(inner)), policy_(policy) {
    if (!inner_) throw InvalidArgument("RetryingBackend needs a backend");
  }

  Generation generate(const ChatPrompt& prompt,
                      const GenerationParams& params) override {
    return with_retries([&] { return inner_->generate(prompt, params); });
  }

  TokenDistribution next_token_distribution(
      const ChatPrompt& prompt,
      std::span<const std::string> candidates) override {
    return with_retries(
        [&] { return inner_->next_token_distribution(prompt, candidates); });
  }

  Timing timing() const override { return inner_->timing(); }
  std::string name() const override { return inner_->name(); }

 private:
  template <class F>
  auto with_retries(F&& call) -> decltype(call()) {
    auto delay = policy_.initial_backoff;
    for (int attempt = 0;; ++attempt) {
      try {
        return call();
      } catch (const TransportError&) {
        if (attempt >= policy_.max_retries) throw;
      }
      if (delay.count() > 0) std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(static_cast<std::int64_t>(
          static_cast<double>(delay.count()) * policy_.backoff_multiplier));
    }
  }

  BackendPtr inner_;
  RetryPolicy policy_;
};

inline void require_prompt(const ChatPrompt& prompt) {
  if (prompt.user.empty()) throw InvalidArgument("prompt must be non-empty");
}

}  // namespace scot
