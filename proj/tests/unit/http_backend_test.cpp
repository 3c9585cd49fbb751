#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "test_util.hpp"

using namespace scot;

namespace {

/// Local chat-completion server; `handler` builds the reply per request.
class FakeServer {
 public:
  using Handler = std::function<void(const nlohmann::json&, httplib::Response&)>;

  explicit FakeServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                 httplib::Response& res) {
      last_body = nlohmann::json::parse(req.body);
      last_auth = req.get_header_value("Authorization");
      handler_(last_body, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  HttpBackendConfig config() const {
    HttpBackendConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_);
    c.model = "test-model";
    c.timeout_s = 5;
    return c;
  }

  nlohmann::json last_body;
  std::string last_auth;

 private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

void reply(httplib::Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

nlohmann::json completion(const std::string& text, int tokens, const std::string& finish) {
  return {{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}},
                        {"finish_reason", finish}}}},
          {"usage", {{"prompt_tokens", 12}, {"completion_tokens", tokens}}}};
}

}  // namespace

TEST(HttpBackend, GenerateParsesCompletion) {
  FakeServer server([](const nlohmann::json&, httplib::Response& res) {
    reply(res, completion("<think>steps", 42, "stop"));
  });
  auto cfg = server.config();
  cfg.api_key = "k-123";
  HttpBackend b(cfg);
  GenerationParams p;
  p.seed = 9;
  p.stop_sequences = {"</think>"};
  const auto g = b.generate({"question", "<think>prefix"}, p);
  EXPECT_EQ(g.text, "<think>steps");
  EXPECT_EQ(g.token_count, 42);
  EXPECT_EQ(g.prompt_tokens, 12);
  EXPECT_EQ(g.finish_reason, FinishReason::Stop);
  EXPECT_GT(g.duration_ms, 0.0);

  const auto& body = server.last_body;
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["seed"], 9);
  EXPECT_EQ(body["stop"], nlohmann::json::array({"</think>"}));
  EXPECT_EQ(body["max_tokens"], 5000);
  ASSERT_EQ(body["messages"].size(), 2u);
  EXPECT_EQ(body["messages"][1]["role"], "assistant");
  EXPECT_EQ(body["continue_final_message"], true);
  EXPECT_EQ(server.last_auth, "Bearer k-123");
}

TEST(HttpBackend, LengthFinishMapsToCap) {
  FakeServer server([](const nlohmann::json&, httplib::Response& res) {
    reply(res, completion("abc", 3, "length"));
  });
  HttpBackend b(server.config());
  GenerationParams p;
  p.max_new_tokens = 3;
  const auto g = b.generate({"q", ""}, p);
  EXPECT_EQ(g.finish_reason, FinishReason::LengthCap);
  EXPECT_EQ(g.token_count, 3);
}

TEST(HttpBackend, DistributionPoolsTopLogprobs) {
  FakeServer server([](const nlohmann::json& body, httplib::Response& res) {
    EXPECT_EQ(body["max_tokens"], 1);
    EXPECT_EQ(body["logprobs"], true);
    EXPECT_EQ(body["top_logprobs"], 20);
    nlohmann::json top = nlohmann::json::array();
    top.push_back({{"token", "3"}, {"logprob", std::log(0.5)}});
    top.push_back({{"token", " 3"}, {"logprob", std::log(0.2)}});
    top.push_back({{"token", "1"}, {"logprob", std::log(0.1)}});
    top.push_back({{"token", "The"}, {"logprob", std::log(0.1)}});
    auto j = completion("3", 1, "length");
    j["choices"][0]["logprobs"] = {{"content", {{{"token", "3"}, {"top_logprobs", top}}}}};
    reply(res, j);
  });
  HttpBackend b(server.config());
  const std::vector<std::string> cands{"1", "2", "3"};
  const auto d = b.next_token_distribution({"pick", ""}, cands);
  EXPECT_EQ(d.scores.size(), 2u);
  EXPECT_NEAR(d.scores.at("3"), 0.7, 1e-9);
  EXPECT_NEAR(d.scores.at("1"), 0.1, 1e-9);
  EXPECT_FALSE(d.scores.contains("2"));
}

TEST(HttpBackend, MissingLogprobsSignalsUnsupported) {
  FakeServer server([](const nlohmann::json&, httplib::Response& res) {
    reply(res, completion("3", 1, "length"));
  });
  HttpBackend b(server.config());
  const std::vector<std::string> cands{"1", "2"};
  EXPECT_THROW(b.next_token_distribution({"pick", ""}, cands), LogprobsUnsupported);
}

TEST(HttpBackend, AlternativesDisabledSignalsUnsupported) {
  HttpBackendConfig cfg;
  cfg.base_url = "http://127.0.0.1:9";
  cfg.logprobs = false;
  HttpBackend b(cfg);
  const std::vector<std::string> cands{"1", "2"};
  EXPECT_THROW(b.next_token_distribution({"pick", ""}, cands), LogprobsUnsupported);
}

TEST(HttpBackend, StatusMapping) {
  std::atomic<int> status{400};
  FakeServer server([&](const nlohmann::json&, httplib::Response& res) {
    reply(res, {{"error", "x"}}, status.load());
  });
  HttpBackend b(server.config());
  EXPECT_THROW(b.generate({"q", ""}, {}), BackendRefused);
  status = 503;
  EXPECT_THROW(b.generate({"q", ""}, {}), TransportError);
  status = 429;
  EXPECT_THROW(b.generate({"q", ""}, {}), TransportError);
}

TEST(HttpBackend, RetriedThroughRetryingBackend) {
  std::atomic<int> calls{0};
  FakeServer server([&](const nlohmann::json&, httplib::Response& res) {
    if (++calls < 3) return reply(res, {{"error", "busy"}}, 503);
    reply(res, completion("ok", 1, "stop"));
  });
  RetryingBackend b(std::make_shared<HttpBackend>(server.config()),
                    {3, std::chrono::milliseconds(1), 2.0});
  EXPECT_EQ(b.generate({"q", ""}, {}).text, "ok");
  EXPECT_EQ(calls.load(), 3);
}

TEST(HttpBackend, ConnectionRefusedIsTransportError) {
  HttpBackendConfig cfg;
  cfg.base_url = "http://127.0.0.1:1";
  cfg.timeout_s = 2;
  HttpBackend b(cfg);
  EXPECT_THROW(b.generate({"q", ""}, {}), TransportError);
}

TEST(HttpBackend, SlowServerTimesOut) {
  FakeServer server([](const nlohmann::json&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    reply(res, completion("late", 1, "stop"));
  });
  auto cfg = server.config();
  cfg.timeout_s = 0.5;
  HttpBackend b(cfg);
  EXPECT_THROW(b.generate({"q", ""}, {}), Timeout);
}

TEST(HttpBackend, NonJsonBodyIsRefusal) {
  FakeServer server([](const nlohmann::json&, httplib::Response& res) {
    res.status = 200;
    res.set_content("<html>", "text/html");
  });
  HttpBackend b(server.config());
  EXPECT_THROW(b.generate({"q", ""}, {}), BackendRefused);
}
