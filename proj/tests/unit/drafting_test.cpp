#include <gtest/gtest.h>

#include <set>

#include "test_util.hpp"

using namespace scot;
using scot::testing::FakeBackend;

TEST(LongestDraftTokens, Examples) {
  auto mk = [](std::vector<std::int64_t> counts) {
    std::vector<CotDraft> ds;
    for (std::size_t i = 0; i < counts.size(); ++i)
      ds.push_back({static_cast<int>(i) + 1, "", counts[i], 0.0, false});
    return ds;
  };
  EXPECT_EQ(longest_draft_tokens(mk({265, 100, 30})), 265);
  EXPECT_EQ(longest_draft_tokens({}), 0);
  EXPECT_EQ(longest_draft_tokens(mk({7, 7, 7})), 7);
}

TEST(DraftChains, FiveDraftsFromScriptedCounts) {
  const std::vector<std::int64_t> counts{265, 210, 180, 90, 250};
  FakeBackend b([&](const ChatPrompt&, const GenerationParams& p) {
    const auto i = static_cast<std::size_t>(*p.seed - 100 - 1);
    return Generation{"<think>chain " + std::to_string(i + 1), counts[i], 10,
                      static_cast<double>(counts[i]) * 10.0, FinishReason::Stop};
  });
  GenerationParams params;
  params.seed = 100;
  const auto set = draft_chains({"question", ""}, 5, params, b);
  ASSERT_EQ(set.drafts.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(set.drafts[i].index, i + 1);
    EXPECT_EQ(set.drafts[i].text, "chain " + std::to_string(i + 1));
    EXPECT_FALSE(set.drafts[i].truncated);
  }
  EXPECT_EQ(longest_draft_tokens(set.drafts), 265);
  // virtual timing: the fan-out costs its slowest member, not the sum
  EXPECT_DOUBLE_EQ(set.elapsed_ms, 2650.0);
}

TEST(DraftChains, SeedsAreDistinctAndStopAtClose) {
  FakeBackend b([](const ChatPrompt&, const GenerationParams&) {
    return Generation{"x", 1, 1, 1.0, FinishReason::Stop};
  });
  GenerationParams params;
  params.seed = 7;
  draft_chains({"q", ""}, 8, params, b);
  std::set<std::int64_t> seeds;
  for (const auto& p : b.params_seen) {
    seeds.insert(*p.seed);
    EXPECT_NE(std::find(p.stop_sequences.begin(), p.stop_sequences.end(), "</think>"),
              p.stop_sequences.end());
  }
  EXPECT_EQ(seeds, (std::set<std::int64_t>{8, 9, 10, 11, 12, 13, 14, 15}));
}

TEST(DraftChains, SingleDraft) {
  SimBackend b(scot::testing::basic_scenario());
  const auto set = draft_chains({"q", ""}, 1, {}, b);
  ASSERT_EQ(set.drafts.size(), 1u);
  EXPECT_EQ(set.drafts[0].index, 1);
}

TEST(DraftChains, WallClockFanOutIsConcurrent) {
  FakeBackend b(
      [](const ChatPrompt&, const GenerationParams&) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        return Generation{"x", 1, 1, 100.0, FinishReason::Stop};
      },
      nullptr, Timing::WallClock);
  const auto set = draft_chains({"q", ""}, 5, {}, b);
  EXPECT_GE(set.elapsed_ms, 95.0);
  EXPECT_LT(set.elapsed_ms, 350.0);
}

TEST(DraftChains, FailedDraftBecomesEmptyTruncated) {
  FakeBackend b([](const ChatPrompt&, const GenerationParams& p) {
    if (*p.seed == 3) throw BackendRefused("nope", 400);
    return Generation{"ok", 5, 1, 5.0, FinishReason::Stop};
  });
  const auto set = draft_chains({"q", ""}, 4, {}, b);
  ASSERT_EQ(set.failures.size(), 1u);
  EXPECT_EQ(set.failures[0].index, 3);
  EXPECT_TRUE(set.drafts[2].truncated);
  EXPECT_EQ(set.drafts[2].text, "");
  EXPECT_EQ(set.drafts[2].token_count, 0);
  EXPECT_FALSE(set.drafts[0].truncated);
}

TEST(DraftChains, AllFailed) {
  FakeBackend b([](const ChatPrompt&, const GenerationParams&) -> Generation {
    throw TransportError("down");
  });
  EXPECT_THROW(draft_chains({"q", ""}, 3, {}, b), AllDraftsFailed);
}

TEST(DraftChains, TruncationFlag) {
  FakeBackend b([](const ChatPrompt&, const GenerationParams& p) {
    if (*p.seed == 1) return Generation{"<think>long", 5000, 1, 1.0, FinishReason::LengthCap};
    return Generation{"<think>short", 10, 1, 1.0, FinishReason::Stop};
  });
  const auto set = draft_chains({"q", ""}, 2, {}, b);
  EXPECT_TRUE(set.drafts[0].truncated);
  EXPECT_FALSE(set.drafts[1].truncated);
}

TEST(DraftChains, RejectsBadCounts) {
  SimBackend b(scot::testing::basic_scenario());
  EXPECT_THROW(draft_chains({"q", ""}, 0, {}, b), InvalidArgument);
  EXPECT_THROW(draft_chains({"q", ""}, 10, {}, b), InvalidArgument);
}

TEST(DraftChains, DeterministicUnderSim) {
  SimBackend b(scot::testing::basic_scenario());
  GenerationParams params;
  params.seed = 42;
  const auto a = draft_chains({"some question", ""}, 6, params, b);
  const auto c = draft_chains({"some question", ""}, 6, params, b);
  EXPECT_EQ(a.drafts, c.drafts);
}

TEST(DraftChains, AtLeastOneCorrectIsMonotoneInN) {
  auto s = scot::testing::basic_scenario();
  s.p_correct = 0.3;
  SimBackend b(s);
  double prev = -1.0;
  for (int n = 1; n <= 8; ++n) {
    int hits = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
      GenerationParams params;
      params.seed = t * 16;
      const auto set = draft_chains({"problem " + std::to_string(t), ""}, n, params, b);
      hits += std::any_of(set.drafts.begin(), set.drafts.end(), [](const CotDraft& d) {
        return d.text.find("verdict=sound") != std::string::npos;
      });
    }
    const double rate = static_cast<double>(hits) / trials;
    EXPECT_GE(rate, prev) << "n=" << n;
    prev = rate;
  }
}
