#include <gtest/gtest.h>

#include "ddsl/patterns.hpp"

using namespace ddsl;

TEST(Patterns, HandEvaluatedColumns) {
  const PatternParams p;
  EXPECT_TRUE(pattern_lit(p, 1, 5));   // on the line centre
  EXPECT_FALSE(pattern_lit(p, 1, 8));  // 3 px away, half-width 2.5
  EXPECT_TRUE(pattern_lit(p, 1, 7));
  EXPECT_TRUE(pattern_lit(p, 1, 3));
  EXPECT_FALSE(pattern_lit(p, 1, 2));
  EXPECT_TRUE(pattern_lit(p, 1, 45));
}

TEST(Patterns, DefaultsAndValidation) {
  const PatternParams p;
  EXPECT_EQ(p.count, 8);
  EXPECT_EQ(p.line_shift, 5);
  EXPECT_EQ(p.line_width, 5);
  EXPECT_EQ(p.line_offset, 40);
  PatternParams bad = p;
  bad.line_width = 40;
  EXPECT_THROW(generate_patterns(bad), ParamError);
  bad = p;
  bad.line_width = 0;
  EXPECT_THROW(generate_patterns(bad), ParamError);
  bad = p;
  bad.line_shift = 0;
  EXPECT_THROW(generate_patterns(bad), ParamError);
  bad = p;
  bad.count = 0;
  EXPECT_THROW(generate_patterns(bad), ParamError);
}

TEST(Patterns, BlackPatternIsZero) {
  PatternParams p;
  p.proj_width = 300;
  p.proj_height = 4;
  const PatternSet s = generate_patterns(p);
  for (int q = 0; q < p.proj_width; ++q) EXPECT_FALSE(s.black.lit(q));
  for (float v : s.black.to_image().data()) EXPECT_EQ(v, 0.0f);
}

TEST(Patterns, ShiftAndPeriodicityIdentities) {
  for (const PatternParams base : {PatternParams{}, PatternParams{37, 3, 6, 11, 500, 2}, PatternParams{100, 7, 1, 4, 400, 1}}) {
    const PatternSet s = generate_patterns(base);
    const int W = base.proj_width;
    for (int i = 0; i < base.count; ++i)
      for (int q = 0; q < W; ++q) {
        if (q + base.line_offset < W) EXPECT_EQ(s.patterns[i].lit(q), s.patterns[i].lit(q + base.line_offset));
        if (i + 1 < base.count && q - base.line_shift >= 0)
          EXPECT_EQ(s.patterns[i + 1].lit(q), s.patterns[i].lit(q - base.line_shift));
      }
  }
}

TEST(Patterns, ChannelsEqualAndBinary) {
  PatternParams p;
  p.proj_width = 120;
  p.proj_height = 3;
  const Image img = generate_patterns(p).patterns[2].to_image();
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 120; ++x) {
      const float v = img(x, y, 0);
      EXPECT_TRUE(v == 0.0f || v == 1.0f);
      EXPECT_EQ(img(x, y, 1), v);
      EXPECT_EQ(img(x, y, 2), v);
    }
}

TEST(Patterns, DutyCycleByEnumeration) {
  // Residues {38, 39, 0, 1, 2} around each centre are lit.
  EXPECT_DOUBLE_EQ(duty_cycle(PatternParams{}), 5.0 / 40.0);
  PatternParams wide;
  wide.line_width = 39;
  EXPECT_NEAR(duty_cycle(wide), 1.0, 0.03);
  PatternParams thin;
  thin.line_width = 1;
  thin.line_offset = 100;
  const double d = duty_cycle(thin);
  EXPECT_GE(d, 0.01);
  EXPECT_LE(d, 0.03);
}

TEST(Patterns, DefaultLinesVisitEveryShiftResidueOnce) {
  // Over M = 8 patterns the line centres i*5 mod 40 cover all eight
  // multiples of 5 exactly once.
  const PatternParams p;
  std::vector<int> seen(p.line_offset, 0);
  for (int i = 1; i <= p.count; ++i) seen[(i * p.line_shift) % p.line_offset]++;
  for (int r = 0; r < p.line_offset; ++r) EXPECT_EQ(seen[r], r % p.line_shift == 0 ? 1 : 0);
  // And every column is lit by at least one pattern.
  PatternParams q = p;
  q.proj_width = 200;
  const PatternSet s = generate_patterns(q);
  for (int x = 0; x < q.proj_width; ++x) {
    int lit = 0;
    for (const auto& pat : s.patterns) lit += pat.lit(x);
    EXPECT_GE(lit, 1);
  }
}
