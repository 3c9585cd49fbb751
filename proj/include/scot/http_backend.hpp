#pragma once

// Chat-completion HTTP client (the JSON protocol exposed by vLLM, llama.cpp
// server, SGLang, TGI and hosted APIs).

#include <chrono>
#include <cmath>
#include <map>
#include <span>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "scot/backend.hpp"

namespace scot {

struct HttpBackendConfig {
  std::string name = "http";
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key;
  double timeout_s = 600.0;
  int top_k = 20;
  bool logprobs = true;
  /// Sends continue_final_message / add_generation_prompt so servers that
  /// understand them (vLLM) continue the assistant prefix in place.
  bool continue_final_message = true;
};

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) throw InvalidArgument("base_url is required");
    if (cfg_.top_k < 1) throw InvalidArgument("top_k must be >= 1");
  }

  std::string name() const override { return cfg_.name; }
  const HttpBackendConfig& config() const { return cfg_; }

  nlohmann::json request_body(const ChatPrompt& prompt,
                              const GenerationParams& params) const {
    nlohmann::json messages = nlohmann::json::array();
    messages.push_back({{"role", "user"}, {"content", prompt.user}});
    nlohmann::json body = {{"model", cfg_.model},
                           {"temperature", params.temperature},
                           {"max_tokens", params.max_new_tokens}};
    if (!prompt.assistant_prefix.empty()) {
      messages.push_back({{"role", "assistant"}, {"content", prompt.assistant_prefix}});
      if (cfg_.continue_final_message) {
        body["continue_final_message"] = true;
        body["add_generation_prompt"] = false;
      }
    }
    body["messages"] = std::move(messages);
    if (params.seed) body["seed"] = *params.seed;
    if (!params.stop_sequences.empty()) body["stop"] = params.stop_sequences;
    return body;
  }

  Generation generate(const ChatPrompt& prompt,
                      const GenerationParams& params) override {
    require_prompt(prompt);
    params.validate();
    const auto started = std::chrono::steady_clock::now();
    const auto reply = post(request_body(prompt, params));
    Generation g;
    g.duration_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - started)
                        .count();
    try {
      const auto& choice = reply.at("choices").at(0);
      const auto& content = choice.at("message").at("content");
      g.text = content.is_null() ? "" : content.get<std::string>();
      const auto& usage = reply.at("usage");
      g.token_count = usage.at("completion_tokens").get<std::int64_t>();
      g.prompt_tokens = usage.value("prompt_tokens", std::int64_t{0});
      const auto reason = choice.value("finish_reason", std::string("stop"));
      g.finish_reason =
          reason == "length" ? FinishReason::LengthCap : FinishReason::Stop;
    } catch (const nlohmann::json::exception& e) {
      throw BackendRefused(name() + ": malformed completion: " + e.what());
    }
    if (g.token_count >= params.max_new_tokens) {
      g.token_count = params.max_new_tokens;
      g.finish_reason = FinishReason::LengthCap;
    }
    return g;
  }

  TokenDistribution next_token_distribution(
      const ChatPrompt& prompt,
      std::span<const std::string> candidates) override {
    require_prompt(prompt);
    if (candidates.empty()) throw InvalidArgument("candidates must be non-empty");
    if (!cfg_.logprobs)
      throw LogprobsUnsupported(name() + ": log-probabilities disabled");

    GenerationParams params;
    params.temperature = 0.0;
    params.max_new_tokens = 1;
    auto body = request_body(prompt, params);
    body["logprobs"] = true;
    body["top_logprobs"] = cfg_.top_k;

    const auto started = std::chrono::steady_clock::now();
    const auto reply = post(body);
    TokenDistribution out;
    out.duration_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - started)
                          .count();

    const nlohmann::json* top = nullptr;
    try {
      const auto& lp = reply.at("choices").at(0).at("logprobs");
      if (!lp.is_null()) top = &lp.at("content").at(0).at("top_logprobs");
    } catch (const nlohmann::json::exception&) {
    }
    if (top == nullptr || !top->is_array())
      throw LogprobsUnsupported(name() + ": response carries no top_logprobs");

    // Tokenizers may surface " 3" and "3" separately; their mass is pooled.
    for (const auto& alt : *top) {
      if (!alt.contains("token") || !alt.contains("logprob")) continue;
      const auto token = trim(alt["token"].get<std::string>());
      for (const auto& c : candidates)
        if (token == c) out.scores[c] += std::exp(alt["logprob"].get<double>());
    }
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\n\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\n\r");
    return s.substr(b, e - b + 1);
  }

  nlohmann::json post(const nlohmann::json& body) const {
    httplib::Client client(cfg_.base_url);
    const auto secs = static_cast<time_t>(cfg_.timeout_s);
    const auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!cfg_.api_key.empty())
      headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(cfg_.path, headers, body.dump(), "application/json");
    if (!res) {
      const auto err = res.error();
      const double waited = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - started)
                                .count();
      if (err == httplib::Error::ConnectionTimeout ||
          (err == httplib::Error::Read && waited >= cfg_.timeout_s * 0.99))
        throw Timeout(name() + ": no response within " +
                      std::to_string(cfg_.timeout_s) + " s");
      throw TransportError(name() + ": " + httplib::to_string(err));
    }
    if (res->status == 429 || res->status >= 500)
      throw TransportError(name() + ": HTTP " + std::to_string(res->status));
    if (res->status != 200)
      throw BackendRefused(name() + ": HTTP " + std::to_string(res->status) +
                               ": " + res->body.substr(0, 300),
                           res->status);
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw BackendRefused(name() + ": response is not JSON: " + e.what(),
                           res->status);
    }
  }

  HttpBackendConfig cfg_;
};

}  // namespace scot
