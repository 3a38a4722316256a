#include <random>

#include <gtest/gtest.h>

#include "pws/address.hpp"

namespace pws {
namespace {

TEST(AddressTest, ColumnLetters) {
  EXPECT_EQ(column_letters(1), "A");
  EXPECT_EQ(column_letters(26), "Z");
  EXPECT_EQ(column_letters(27), "AA");
  EXPECT_EQ(column_letters(702), "ZZ");
  EXPECT_EQ(column_letters(703), "AAA");
}

TEST(AddressTest, ParsesPlainAndQuotedSheets) {
  auto a = parse_address("Sheet1!B3");
  EXPECT_EQ(a.sheet, "Sheet1");
  EXPECT_EQ(a.at, (GridPoint{3, 2}));

  auto b = parse_address("'My ''odd'' sheet'!$C$10");
  EXPECT_EQ(b.sheet, "My 'odd' sheet");
  EXPECT_EQ(b.at, (GridPoint{10, 3}));

  EXPECT_EQ(parse_address("D4", "Data").sheet, "Data");
}

TEST(AddressTest, RejectsOutOfGridAndMalformed) {
  EXPECT_THROW(parse_address("Sheet1!A0"), Error);
  EXPECT_THROW(parse_address("Sheet1!A10001"), Error);
  EXPECT_THROW(parse_address("Sheet1!NTQ1"), Error);  // column 10001
  EXPECT_THROW(parse_address("A1"), Error);          // no sheet, no default
  EXPECT_THROW(parse_address("Sheet1!1A"), Error);
  try {
    parse_address("Sheet1!ZZZZ1");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownAddress);
  }
}

TEST(AddressTest, FormatParseRoundTrip) {
  std::mt19937 rng(7);
  const std::string alphabet = "Ab_ .'!-9xZ";
  std::uniform_int_distribution<int> row(1, kMaxRows), col(1, kMaxCols), len(1, 8),
      ch(0, static_cast<int>(alphabet.size()) - 1);
  for (int i = 0; i < 2000; ++i) {
    std::string name;
    for (int k = len(rng); k > 0; --k) name += alphabet[ch(rng)];
    CellAddress a{name, {row(rng), col(rng)}};
    EXPECT_EQ(parse_address(format_address(a)), a) << format_address(a);
  }
}

TEST(AddressTest, RectSpanningNormalises) {
  auto r = Rect::spanning({5, 1}, {2, 4});
  EXPECT_EQ(r.top_left, (GridPoint{2, 1}));
  EXPECT_EQ(r.bottom_right, (GridPoint{5, 4}));
  EXPECT_EQ(r.area(), 16);
  EXPECT_EQ(parse_rect("C3:A1"), r.spanning({1, 1}, {3, 3}));
}

}  // namespace
}  // namespace pws
