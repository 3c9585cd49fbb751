#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "scot/grading.hpp"

using namespace scot;

TEST(Grade, Examples) {
  EXPECT_TRUE(grade_answer("... the answer is \\boxed{42}.", "42"));
  EXPECT_TRUE(grade_answer("total is 1,000", "1000"));
  EXPECT_TRUE(grade_answer("answer \\boxed{1/2}", "0.5"));
  EXPECT_FALSE(grade_answer("answer \\boxed{41}", "42"));
}

TEST(Grade, NoAnswerIsFlagged) {
  const auto g = grade("I cannot tell.", "7");
  EXPECT_FALSE(g.correct);
  EXPECT_FALSE(g.extracted.has_value());
}

TEST(Grade, EmptyGoldRejected) { EXPECT_THROW(grade("1", "  "), InvalidArgument); }

TEST(Grade, GoldInReferenceSolutionForm) {
  EXPECT_TRUE(grade_answer("\\boxed{72}", "Natalia sold 48/2 = 24 clips.\n#### 72"));
}

TEST(Extraction, LastBoxedWins) {
  EXPECT_EQ(*extract_answer("\\boxed{1} then \\boxed{\\frac{1}{2}}"), "\\frac{1}{2}");
  EXPECT_EQ(*extract_answer("3 apples and 4.50 dollars"), "4.50");
  EXPECT_EQ(*extract_answer("\\fbox{9}"), "9");
}

TEST(Normalize, CommonForms) {
  EXPECT_EQ(normalize_answer("\\boxed{1,000}"), "1000");
  EXPECT_EQ(normalize_answer("3.500"), "3.5");
  EXPECT_EQ(normalize_answer("\\dfrac{3}{4}"), "3/4");
  EXPECT_EQ(normalize_answer("\\$18"), "18");
  EXPECT_EQ(normalize_answer("90^\\circ"), "90");
  EXPECT_EQ(normalize_answer("\\text{5 cm}"), "5cm");
  EXPECT_EQ(normalize_answer(".5"), "0.5");
  EXPECT_EQ(normalize_answer("2.0"), "2");
}

TEST(Normalize, FixedPoint) {
  for (const char* raw : {"\\boxed{1,000.50}", "\\frac{2}{4}", " 7 ", "-.250", "\\text{yes}",
                          "{{3}}", "x^2+1", "12%", "+4", "3.", "1,2,3"}) {
    const auto once = normalize_answer(raw);
    EXPECT_EQ(normalize_answer(once), once) << raw;
  }
}

TEST(Equivalence, RationalsAgainstFrozenOracleTable) {
  std::ifstream in(std::string(SCOT_TEST_DATA_DIR) + "/fixtures/rational_equivalence.tsv");
  ASSERT_TRUE(in);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string answer, gold, expected;
    std::getline(fields, answer, '\t');
    std::getline(fields, gold, '\t');
    std::getline(fields, expected, '\t');
    EXPECT_EQ(grade_answer("answer \\boxed{" + answer + "}", gold), expected == "true")
        << answer << " vs " << gold;
    ++rows;
  }
  EXPECT_EQ(rows, 200);
}

TEST(ParseRational, Forms) {
  EXPECT_EQ(*parse_rational("0.5"), (Rational{1, 2}));
  EXPECT_EQ(*parse_rational("-6/4"), (Rational{-3, 2}));
  EXPECT_EQ(*parse_rational("12"), (Rational{12, 1}));
  EXPECT_FALSE(parse_rational("1/0"));
  EXPECT_FALSE(parse_rational("abc"));
  EXPECT_FALSE(parse_rational("99999999999999999999"));
}
