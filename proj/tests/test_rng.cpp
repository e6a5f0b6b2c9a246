#include <gtest/gtest.h>

#include <cmath>

#include "common.hpp"

using namespace fbsde;

// Random123 known-answer vector for philox4x32-10, zero counter and key.
TEST(Philox, KnownAnswer) {
  const Counter out = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerAllOnes) {
  const Counter out = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(NormalStream, DeterministicAndSkippable) {
  NormalStream a(42, Stream::Test, 3, 0, 1), b(42, Stream::Test, 3, 0, 1), c(42, Stream::Test, 3, 0, 1);
  std::vector<double> first;
  for (int k = 0; k < 100; ++k) first.push_back(a());
  for (int k = 0; k < 100; ++k) EXPECT_EQ(first[k], b());
  c.skip(37);
  for (int k = 37; k < 100; ++k) EXPECT_EQ(first[k], c());
  NormalStream other(42, Stream::Test, 4, 0, 1);
  EXPECT_NE(first[0], other());
}

TEST(NormalStream, Moments) {
  NormalStream z(7, Stream::Test, 0, 0, 0);
  const int n = 200000;
  double s = 0, s2 = 0, s4 = 0;
  for (int k = 0; k < n; ++k) {
    const double v = z();
    s += v;
    s2 += v * v;
    s4 += v * v * v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 0.1);
}

TEST(Uniform, RangeAndKeying) {
  for (std::uint32_t a = 0; a < 1000; ++a) {
    const double u = uniform01(1, Stream::Sampling, a, 0, 0, 0);
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  EXPECT_NE(uniform01(1, Stream::Sampling, 0, 0, 0, 0), uniform01(2, Stream::Sampling, 0, 0, 0, 0));
}
