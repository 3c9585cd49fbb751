#pragma once

// Declarative run configuration (one JSON file per experiment). Secrets come
// from environment variables only.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "json.hpp"
#include "scot/backend.hpp"
#include "scot/http_backend.hpp"
#include "scot/pipeline.hpp"
#include "scot/sim_backend.hpp"

namespace scot {

struct EndpointSpec {
  enum class Kind { Sim, Http } kind = Kind::Sim;
  std::string script;    // sim: path to the scenario file
  std::string scenario;  // sim: scenario name
  HttpBackendConfig http;
  std::string api_key_env = "SCOT_API_KEY";
};

struct RunConfig {
  PipelineConfig pipeline;
  EndpointSpec draft;
  EndpointSpec selector;
  EndpointSpec answer;
  RetryPolicy retry;
  std::int64_t label_answer_max_tokens = 512;
  std::filesystem::path base_dir;  // relative paths resolve against this
};

namespace detail {

using nlohmann::json;

inline void cfg_check_keys(const json& obj, const std::string& path,
                           std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object())
    throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [k, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw ConfigError(path.empty() ? k : path + "." + k, "unknown key");
  }
}

template <class T>
void cfg_read(const json& obj, std::string_view key, const std::string& path,
              T& into) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    into = it->template get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path.empty() ? std::string(key) : path + "." + std::string(key),
                      "wrong type");
  }
}

inline GenerationParams cfg_params(const json& obj, const std::string& path,
                                   GenerationParams p) {
  cfg_check_keys(obj, path, {"temperature", "max_new_tokens", "seed"});
  cfg_read(obj, "temperature", path, p.temperature);
  cfg_read(obj, "max_new_tokens", path, p.max_new_tokens);
  if (obj.contains("seed")) {
    std::int64_t seed = 0;
    cfg_read(obj, "seed", path, seed);
    p.seed = seed;
  }
  if (!(p.temperature >= 0)) throw ConfigError(path + ".temperature", "must be >= 0");
  if (p.max_new_tokens < 1) throw ConfigError(path + ".max_new_tokens", "must be >= 1");
  return p;
}

inline EndpointSpec cfg_endpoint(const json& obj, const std::string& path) {
  EndpointSpec e;
  std::string kind = "sim";
  cfg_read(obj, "kind", path, kind);
  if (kind == "sim") {
    e.kind = EndpointSpec::Kind::Sim;
    cfg_check_keys(obj, path, {"kind", "script", "scenario"});
    cfg_read(obj, "script", path, e.script);
    cfg_read(obj, "scenario", path, e.scenario);
    if (e.script.empty()) throw ConfigError(path + ".script", "required");
    if (e.scenario.empty()) throw ConfigError(path + ".scenario", "required");
  } else if (kind == "http") {
    e.kind = EndpointSpec::Kind::Http;
    cfg_check_keys(obj, path,
                   {"kind", "name", "base_url", "path", "model", "api_key_env",
                    "timeout_s", "top_k", "logprobs", "continue_final_message"});
    auto& h = e.http;
    h.name = path.substr(path.rfind('.') + 1);
    cfg_read(obj, "name", path, h.name);
    cfg_read(obj, "base_url", path, h.base_url);
    cfg_read(obj, "path", path, h.path);
    cfg_read(obj, "model", path, h.model);
    cfg_read(obj, "api_key_env", path, e.api_key_env);
    cfg_read(obj, "timeout_s", path, h.timeout_s);
    cfg_read(obj, "top_k", path, h.top_k);
    cfg_read(obj, "logprobs", path, h.logprobs);
    cfg_read(obj, "continue_final_message", path, h.continue_final_message);
    if (h.base_url.empty()) throw ConfigError(path + ".base_url", "required");
    if (h.model.empty()) throw ConfigError(path + ".model", "required");
    if (!(h.timeout_s > 0)) throw ConfigError(path + ".timeout_s", "must be positive");
    if (h.top_k < 1) throw ConfigError(path + ".top_k", "must be >= 1");
  } else {
    throw ConfigError(path + ".kind", "expected 'sim' or 'http', got '" + kind + "'");
  }
  return e;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j,
                                  std::filesystem::path base_dir = {}) {
  using detail::cfg_read;
  detail::cfg_check_keys(
      j, "",
      {"n", "single_draft", "error_correction", "question_parallelism",
       "base_seed", "dataset", "think_open", "think_close", "special_text",
       "selection_template", "question_template", "draft_params",
       "target_params", "label_answer_max_tokens", "retry", "endpoints"});
  RunConfig rc;
  rc.base_dir = std::move(base_dir);
  auto& p = rc.pipeline;
  cfg_read(j, "n", "", p.n);
  if (p.n < 1 || p.n > kMaxDraftCount)
    throw ConfigError("n", "must be in 1.." + std::to_string(kMaxDraftCount) +
                               " (single-digit option labels)");
  cfg_read(j, "single_draft", "", p.single_draft);
  cfg_read(j, "error_correction", "", p.error_correction);
  cfg_read(j, "question_parallelism", "", p.question_parallelism);
  if (p.question_parallelism < 1)
    throw ConfigError("question_parallelism", "must be >= 1");
  cfg_read(j, "base_seed", "", p.base_seed);
  cfg_read(j, "dataset", "", p.dataset);
  cfg_read(j, "think_open", "", p.delims.open);
  cfg_read(j, "think_close", "", p.delims.close);
  try {
    p.delims.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("think_open", e.what());
  }
  cfg_read(j, "special_text", "", p.special_text);
  if (p.special_text.empty()) throw ConfigError("special_text", "must be non-empty");
  cfg_read(j, "question_template", "", p.question_template);
  if (p.question_template.find("{question}") == std::string::npos)
    throw ConfigError("question_template", "needs a {question} placeholder");
  if (j.contains("selection_template")) {
    std::string path;
    cfg_read(j, "selection_template", "", path);
    try {
      p.selection_template = SelectionTemplate::load((rc.base_dir / path).string());
    } catch (const InvalidArgument& e) {
      throw ConfigError("selection_template", e.what());
    }
  }
  if (j.contains("draft_params"))
    p.draft_params = detail::cfg_params(j["draft_params"], "draft_params", p.draft_params);
  if (j.contains("target_params"))
    p.target_params =
        detail::cfg_params(j["target_params"], "target_params", p.target_params);
  cfg_read(j, "label_answer_max_tokens", "", rc.label_answer_max_tokens);
  if (j.contains("retry")) {
    const auto& r = j["retry"];
    detail::cfg_check_keys(r, "retry", {"max_retries", "initial_backoff_ms"});
    cfg_read(r, "max_retries", "retry", rc.retry.max_retries);
    std::int64_t ms = rc.retry.initial_backoff.count();
    cfg_read(r, "initial_backoff_ms", "retry", ms);
    rc.retry.initial_backoff = std::chrono::milliseconds(ms);
  }

  const auto eit = j.find("endpoints");
  if (eit == j.end()) throw ConfigError("endpoints", "required");
  detail::cfg_check_keys(*eit, "endpoints", {"draft", "selector", "answer"});
  if (!eit->contains("draft")) throw ConfigError("endpoints.draft", "required");
  if (!eit->contains("answer")) throw ConfigError("endpoints.answer", "required");
  rc.draft = detail::cfg_endpoint((*eit)["draft"], "endpoints.draft");
  rc.answer = detail::cfg_endpoint((*eit)["answer"], "endpoints.answer");
  // without a separate selector, the plain target selects (untuned ablation)
  rc.selector = eit->contains("selector")
                    ? detail::cfg_endpoint((*eit)["selector"], "endpoints.selector")
                    : rc.answer;
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return parse_run_config(j, std::filesystem::path(path).parent_path());
}

inline BackendPtr make_backend(const EndpointSpec& spec, const RunConfig& rc,
                               const std::string& role) {
  BackendPtr raw;
  if (spec.kind == EndpointSpec::Kind::Sim) {
    const auto script = SimScript::load((rc.base_dir / spec.script).string());
    try {
      raw = std::make_shared<SimBackend>(script.scenario(spec.scenario));
    } catch (const ConfigError& e) {
      throw ConfigError("endpoints." + role + ".scenario", e.what());
    }
  } else {
    auto http = spec.http;
    if (const char* key = std::getenv(spec.api_key_env.c_str())) http.api_key = key;
    raw = std::make_shared<HttpBackend>(std::move(http));
  }
  return std::make_shared<RetryingBackend>(std::move(raw), rc.retry);
}

inline Endpoints make_endpoints(const RunConfig& rc) {
  return {make_backend(rc.draft, rc, "draft"), make_backend(rc.selector, rc, "selector"),
          make_backend(rc.answer, rc, "answer")};
}

}  // namespace scot
