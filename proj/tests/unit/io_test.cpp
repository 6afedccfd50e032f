#include <sstream>

#include <gtest/gtest.h>

#include "stylelens/common.hpp"
#include "stylelens/io.hpp"

namespace stylelens {
namespace {

TEST(SplitCsvLine, PlainFields) {
  EXPECT_EQ(split_csv_line("a,b,,c"), (std::vector<std::string>{"a", "b", "", "c"}));
}

TEST(SplitCsvLine, QuotedCommaAndDoubledQuote) {
  EXPECT_EQ(split_csv_line(R"(x,"a,b","say ""hi""")"),
            (std::vector<std::string>{"x", "a,b", "say \"hi\""}));
}

TEST(CsvEscape, RoundTripsThroughSplit) {
  const std::string tricky = "a,\"b\"";
  EXPECT_EQ(split_csv_line(csv_escape(tricky) + ",z"), (std::vector<std::string>{tricky, "z"}));
  EXPECT_EQ(csv_escape("plain"), "plain");
}

TEST(ReadCsv, SkipsCommentsAndBlankLinesAndTracksLines) {
  std::istringstream in("# header block\nname,value\n\nfoo,1\n# note\nbar,2\n");
  const CsvTable t = read_csv(in);
  ASSERT_EQ(t.header, (std::vector<std::string>{"name", "value"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.row_lines, (std::vector<std::size_t>{4, 6}));
  EXPECT_EQ(t.column("value"), 1u);
  EXPECT_FALSE(t.has_column("missing"));
  EXPECT_THROW(t.column("missing"), Error);
}

TEST(ReadCsv, RaggedRowIsAParseError) {
  std::istringstream in("a,b\n1,2,3\n");
  EXPECT_THROW(read_csv(in), ParseError);
}

TEST(ParseDouble, StrictWholeField) {
  EXPECT_DOUBLE_EQ(parse_double("2.5"), 2.5);
  EXPECT_DOUBLE_EQ(parse_double("-1e-3"), -1e-3);
  EXPECT_THROW(parse_double("2.5x"), std::invalid_argument);
  EXPECT_THROW(parse_double(""), std::invalid_argument);
  EXPECT_THROW(parse_double("abc"), std::invalid_argument);
}

TEST(Vec2, Arithmetic) {
  const Vec2 a{3.0, 4.0};
  const Vec2 b{1.0, -2.0};
  EXPECT_DOUBLE_EQ(a.norm(), 5.0);
  EXPECT_EQ(a + b, (Vec2{4.0, 2.0}));
  EXPECT_EQ(a - b, (Vec2{2.0, 6.0}));
  EXPECT_DOUBLE_EQ(a.dot(b), -5.0);
  EXPECT_DOUBLE_EQ(a.cross(b), -10.0);
}

}  // namespace
}  // namespace stylelens
