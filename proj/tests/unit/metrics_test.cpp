#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_util.hpp"

using namespace scot;

namespace {

ReasoningTrace scot_trace(std::string id, double target, double draft, double sel,
                          std::optional<bool> correct = std::nullopt) {
  ReasoningTrace t;
  t.question_id = std::move(id);
  t.dataset = "d";
  t.mode = RunMode::SCoT;
  t.stage_latencies_ms = {draft, sel, target, 0.0};
  t.total_latency_ms = t.stage_latencies_ms.sum_ms();
  t.correct = correct;
  return t;
}

}  // namespace

TEST(SpeedupRatio, TableRows) {
  EXPECT_DOUBLE_EQ(round_to(speedup_ratio(26.5, 11.7), 2), 2.26);
  EXPECT_DOUBLE_EQ(round_to(speedup_ratio(443.6, 325.0), 2), 1.36);
  EXPECT_THROW(speedup_ratio(0.0, 1.0), NonPositiveLatency);
  EXPECT_THROW(speedup_ratio(1.0, -1.0), NonPositiveLatency);
}

TEST(SpeedupRatio, ReciprocalProperty) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.01, 2000.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng);
    ASSERT_NEAR(speedup_ratio(a, b) * speedup_ratio(b, a), 1.0, 1e-9);
  }
}

TEST(Throughput, ArithmeticAndScaling) {
  EXPECT_DOUBLE_EQ(throughput(100, 10.0), 10.0);
  EXPECT_DOUBLE_EQ(throughput(200, 20.0), throughput(100, 10.0));
  EXPECT_THROW(throughput(5, 0.0), NonPositiveTime);
}

TEST(ValidTokens, CountsOnlySurvivingTokens) {
  ReasoningTrace t;
  t.drafts = {{1, "", 100, 0, false}, {2, "", 265, 0, false}};
  t.selection = SelectionOutcome{2, {}, 0, false};
  t.cot_source = CotSource::accepted(2);
  EXPECT_EQ(valid_tokens(t), 266);
  t.cot_source = CotSource::rethink();
  t.l_M = 302;
  EXPECT_EQ(valid_tokens(t), 303);
  t.cot_source = CotSource::vanilla();
  t.selection.reset();
  EXPECT_EQ(valid_tokens(t), 302);
}

TEST(LatencyDecomposition, FractionsOfReasoningTime) {
  const std::vector<ReasoningTrace> ts{scot_trace("a", 339, 602, 59)};
  const auto f = latency_decomposition(ts);
  EXPECT_NEAR(f.target, 0.339, 1e-12);
  EXPECT_NEAR(f.draft, 0.602, 1e-12);
  EXPECT_NEAR(f.selection, 0.059, 1e-12);
}

TEST(LatencyDecomposition, AllRethinkStillNormalized) {
  const std::vector<ReasoningTrace> ts{scot_trace("a", 5000, 100, 10),
                                       scot_trace("b", 3000, 200, 10)};
  const auto f = latency_decomposition(ts);
  EXPECT_NEAR(f.target + f.draft + f.selection, 1.0, 1e-6);
}

TEST(LatencyDecomposition, ZeroSelectionLatency) {
  const std::vector<ReasoningTrace> ts{scot_trace("a", 10, 20, 0)};
  EXPECT_DOUBLE_EQ(latency_decomposition(ts).selection, 0.0);
}

TEST(LatencyDecomposition, Errors) {
  EXPECT_THROW(latency_decomposition({}), EmptyTraceSet);
  auto t = scot_trace("a", 1, 1, 1);
  t.mode = RunMode::Vanilla;
  EXPECT_THROW(latency_decomposition({t}), ModeMismatch);
  EXPECT_THROW(latency_decomposition({scot_trace("a", 0, 0, 0)}), NonPositiveTime);
}

TEST(SelectionAccuracy, Classes) {
  std::vector<SelectionEvalRecord> all_wrong{{{6}, 6, 5}, {{6}, 6, 5}};
  EXPECT_DOUBLE_EQ(selection_accuracy_by_class(all_wrong).class2, 1.0);
  std::vector<SelectionEvalRecord> multi{{{1, 3}, 3, 5}, {{1, 3}, 1, 5}, {{1, 3}, 2, 5}};
  const auto a = selection_accuracy_by_class(multi);
  EXPECT_EQ(a.class1_count, 3);
  EXPECT_EQ(a.class1_correct, 2);
  EXPECT_THROW(selection_accuracy_by_class({{{}, 1, 5}}), InvalidArgument);
}

TEST(Aggregate, AccuracyAndMeans) {
  std::vector<ReasoningTrace> ts{scot_trace("a", 1, 1, 1, true), scot_trace("b", 1, 1, 1, true),
                                 scot_trace("c", 1, 1, 1, false)};
  for (auto& t : ts) t.l_M = 45;
  const auto r = aggregate(ts);
  EXPECT_NEAR(r.accuracy, 0.667, 1e-3);
  EXPECT_NEAR(r.accuracy, 2.0 / 3.0, 1e-9);
  EXPECT_DOUBLE_EQ(r.mean_l_M, 45.0);
  EXPECT_FALSE(r.speedup_r.has_value());
  ASSERT_TRUE(r.latency_fractions.has_value());
}

TEST(Aggregate, Errors) {
  EXPECT_THROW(aggregate({}), EmptyTraceSet);
  auto a = scot_trace("a", 1, 1, 1);
  auto b = scot_trace("b", 1, 1, 1);
  b.dataset = "other";
  EXPECT_THROW(aggregate({a, b}), MixedDatasets);
}

TEST(Aggregate, FailedTracesCountAsWrong) {
  auto ok = scot_trace("a", 1, 1, 1, true);
  auto bad = scot_trace("b", 0, 0, 0);
  bad.failure = "down";
  const auto r = aggregate({ok, bad});
  EXPECT_EQ(r.num_failed, 1);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
}

TEST(Aggregate, PairedVanillaGivesSpeedup) {
  std::vector<ReasoningTrace> scot{scot_trace("a", 0, 11000, 700)};
  scot[0].drafts = {{1, "", 100, 0, false}};
  scot[0].selection = SelectionOutcome{1, {}, 700, false};
  scot[0].cot_source = CotSource::accepted(1);
  ReasoningTrace v;
  v.question_id = "a";
  v.dataset = "d";
  v.mode = RunMode::Vanilla;
  v.cot_source = CotSource::vanilla();
  v.l_M = 302;
  v.stage_latencies_ms.target_thinking_ms = 26500;
  const std::vector<ReasoningTrace> vanilla{v};
  const auto r = aggregate(scot, &vanilla);
  ASSERT_TRUE(r.speedup_r.has_value());
  EXPECT_DOUBLE_EQ(round_to(*r.speedup_r, 2), 2.26);
  ASSERT_TRUE(r.throughput_ratio.has_value());
  EXPECT_NEAR(*r.throughput_ratio, (101 / 11.7) / (302 / 26.5), 1e-9);
  EXPECT_THROW(aggregate(scot, &scot), ModeMismatch);
}

TEST(Aggregate, PermutationInvariant) {
  std::vector<ReasoningTrace> ts;
  std::mt19937 rng(2);
  for (int i = 0; i < 30; ++i) {
    auto t = scot_trace("q" + std::to_string(i), rng() % 1000, 1 + rng() % 1000, rng() % 100,
                        rng() % 2 == 0);
    t.l_M = rng() % 400;
    t.l_Md = rng() % 400;
    t.answer_tokens = rng() % 50;
    ts.push_back(t);
  }
  const auto base = aggregate(ts);
  for (int k = 0; k < 20; ++k) {
    std::shuffle(ts.begin(), ts.end(), rng);
    const auto r = aggregate(ts);
    EXPECT_NEAR(r.accuracy, base.accuracy, 1e-12);
    EXPECT_NEAR(r.mean_latency_s, base.mean_latency_s, 1e-9);
    EXPECT_NEAR(r.mean_l_M, base.mean_l_M, 1e-9);
    EXPECT_NEAR(r.throughput_s, base.throughput_s, 1e-9);
    EXPECT_NEAR(r.latency_fractions->draft, base.latency_fractions->draft, 1e-12);
  }
}
