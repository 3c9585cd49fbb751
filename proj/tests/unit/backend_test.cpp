#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace scot;
using scot::testing::FakeBackend;

namespace {

RetryPolicy instant(int retries) { return {retries, std::chrono::milliseconds(0), 2.0}; }

}  // namespace

TEST(RetryingBackend, RetriesTransportErrorsThenSucceeds) {
  int calls = 0;
  auto inner = std::make_shared<FakeBackend>([&](const ChatPrompt&, const GenerationParams&) {
    if (++calls < 3) throw TransportError("flaky");
    return Generation{"ok", 1, 1, 1.0, FinishReason::Stop};
  });
  RetryingBackend b(inner, instant(3));
  EXPECT_EQ(b.generate({"q", ""}, {}).text, "ok");
  EXPECT_EQ(calls, 3);
}

TEST(RetryingBackend, GivesUpAfterMaxRetries) {
  int calls = 0;
  auto inner = std::make_shared<FakeBackend>(
      [&](const ChatPrompt&, const GenerationParams&) -> Generation {
        ++calls;
        throw TransportError("down");
      });
  RetryingBackend b(inner, instant(2));
  EXPECT_THROW(b.generate({"q", ""}, {}), TransportError);
  EXPECT_EQ(calls, 3);
}

TEST(RetryingBackend, DoesNotRetryRefusalsOrTimeouts) {
  int calls = 0;
  auto refuse = std::make_shared<FakeBackend>(
      [&](const ChatPrompt&, const GenerationParams&) -> Generation {
        ++calls;
        throw BackendRefused("bad request", 400);
      });
  RetryingBackend b(refuse, instant(5));
  EXPECT_THROW(b.generate({"q", ""}, {}), BackendRefused);
  EXPECT_EQ(calls, 1);

  calls = 0;
  auto slow = std::make_shared<FakeBackend>(
      [&](const ChatPrompt&, const GenerationParams&) -> Generation {
        ++calls;
        throw Timeout("slow");
      });
  RetryingBackend t(slow, instant(5));
  EXPECT_THROW(t.generate({"q", ""}, {}), Timeout);
  EXPECT_EQ(calls, 1);
}

TEST(RetryingBackend, ForwardsTimingAndName) {
  auto inner = std::make_shared<FakeBackend>(
      [](const ChatPrompt&, const GenerationParams&) { return Generation{}; }, nullptr,
      Timing::WallClock);
  RetryingBackend b(inner);
  EXPECT_EQ(b.timing(), Timing::WallClock);
  EXPECT_EQ(b.name(), "fake");
}
