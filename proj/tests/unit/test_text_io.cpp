#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "evorep/errors.hpp"
#include "evorep/text_io.hpp"

namespace evorep {
namespace {

TEST(TextIo, FormatRoundTripsExactly) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> mantissa(-1.0, 1.0);
  std::uniform_int_distribution<int> exponent(-300, 300);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(mantissa(rng), exponent(rng));
    EXPECT_EQ(parse_double(format_double(v), "test"), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
}

TEST(TextIo, ParseAcceptsSignAndPadding) {
  EXPECT_EQ(parse_double("+1.5", "t"), 1.5);
  EXPECT_EQ(parse_double("  -2e3 ", "t"), -2000.0);
}

TEST(TextIo, ParseRejectsGarbage) {
  EXPECT_THROW(parse_double("abc", "t"), DataError);
  EXPECT_THROW(parse_double("1.5x", "t"), DataError);
  EXPECT_THROW(parse_double("", "t"), DataError);
  try {
    parse_double("oops", "column y");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("non-numeric"), std::string::npos);
  }
}

}  // namespace
}  // namespace evorep
