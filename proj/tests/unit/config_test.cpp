#include <gtest/gtest.h>

#include <cstdlib>

#include "test_util.hpp"

using namespace scot;

namespace {

nlohmann::json minimal() {
  return nlohmann::json::parse(R"({
    "endpoints": {
      "draft": {"kind": "sim", "script": "sim_script.json", "scenario": "draft"},
      "answer": {"kind": "sim", "script": "sim_script.json", "scenario": "target"}
    }})");
}

std::string config_error_key(const nlohmann::json& j) {
  try {
    parse_run_config(j);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST(RunConfig, DefaultsMatchEvaluationSetup) {
  const auto rc = parse_run_config(minimal());
  EXPECT_EQ(rc.pipeline.n, 5);
  EXPECT_TRUE(rc.pipeline.error_correction);
  EXPECT_DOUBLE_EQ(rc.pipeline.draft_params.temperature, 0.6);
  EXPECT_EQ(rc.pipeline.draft_params.max_new_tokens, 5000);
  EXPECT_EQ(rc.pipeline.target_params.max_new_tokens, 20480);
  EXPECT_EQ(rc.selector.scenario, "target");  // selector defaults to the answer endpoint
}

TEST(RunConfig, ReadsOverrides) {
  auto j = minimal();
  j["n"] = 3;
  j["single_draft"] = true;
  j["error_correction"] = false;
  j["draft_params"] = {{"temperature", 0.8}, {"max_new_tokens", 100}};
  j["retry"] = {{"max_retries", 1}, {"initial_backoff_ms", 5}};
  j["endpoints"]["selector"] = {{"kind", "sim"}, {"script", "s.json"}, {"scenario", "sel"}};
  const auto rc = parse_run_config(j);
  EXPECT_EQ(rc.pipeline.n, 3);
  EXPECT_EQ(rc.pipeline.effective_n(), 1);
  EXPECT_FALSE(rc.pipeline.error_correction);
  EXPECT_EQ(rc.pipeline.draft_params.max_new_tokens, 100);
  EXPECT_EQ(rc.retry.max_retries, 1);
  EXPECT_EQ(rc.selector.scenario, "sel");
}

TEST(RunConfig, ErrorsNameTheKey) {
  auto j = minimal();
  j["temprature"] = 0.5;
  EXPECT_EQ(config_error_key(j), "temprature");

  j = minimal();
  j["n"] = 12;
  EXPECT_EQ(config_error_key(j), "n");

  j = minimal();
  j["n"] = "five";
  EXPECT_EQ(config_error_key(j), "n");

  j = minimal();
  j["draft_params"] = {{"max_new_tokens", 0}};
  EXPECT_EQ(config_error_key(j), "draft_params.max_new_tokens");

  j = minimal();
  j["endpoints"]["draft"]["kind"] = "grpc";
  EXPECT_EQ(config_error_key(j), "endpoints.draft.kind");

  j = minimal();
  j["endpoints"].erase("answer");
  EXPECT_EQ(config_error_key(j), "endpoints.answer");

  j = minimal();
  j["endpoints"]["answer"] = {{"kind", "http"}, {"model", "m"}};
  EXPECT_EQ(config_error_key(j), "endpoints.answer.base_url");
}

TEST(RunConfig, HttpKeyFromEnvironmentOnly) {
  auto j = minimal();
  j["endpoints"]["answer"] = {{"kind", "http"},
                              {"base_url", "http://127.0.0.1:9"},
                              {"model", "m"},
                              {"api_key_env", "SCOT_TEST_KEY"}};
  ::setenv("SCOT_TEST_KEY", "secret-value", 1);
  auto rc = parse_run_config(j);
  EXPECT_EQ(rc.answer.http.api_key, "");
  EXPECT_EQ(rc.answer.api_key_env, "SCOT_TEST_KEY");
  j["endpoints"]["answer"]["api_key"] = "inline";
  EXPECT_EQ(config_error_key(j), "endpoints.answer.api_key");
  ::unsetenv("SCOT_TEST_KEY");
}

TEST(RunConfig, DemoConfigBuildsEndpoints) {
  const auto rc = load_run_config(std::string(SCOT_DEMO_DIR) + "/config.json");
  const auto ep = make_endpoints(rc);
  EXPECT_EQ(ep.draft->timing(), Timing::Virtual);
  EXPECT_EQ(ep.answer->timing(), Timing::Virtual);
}

TEST(RunConfig, MissingFileAndBadJson) {
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), ConfigError);
}
