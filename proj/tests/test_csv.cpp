#include <gtest/gtest.h>

#include <limits>

#include "sga/csv.hpp"
#include "support.hpp"

using namespace sga;

TEST(Csv, NumberRoundTrips) {
    for (double v : {0.0, 0.1, 1.0 / 3.0, -2.5e-300, 1e300, std::numeric_limits<double>::denorm_min()}) {
        EXPECT_EQ(csv::parse_number(csv::number(v)), v);
    }
    EXPECT_EQ(csv::number(0.05), "0.05");
    EXPECT_EQ(csv::number(2.0), "2");
}

TEST(Csv, ParseRejectsGarbage) {
    EXPECT_THROW(csv::parse_number("abc"), ValidationError);
    EXPECT_THROW(csv::parse_number("1.0x"), ValidationError);
    EXPECT_THROW(csv::parse_number(""), ValidationError);
}

TEST(Csv, SplitLine) {
    EXPECT_EQ(csv::split_line("a,b,,c\r"), (std::vector<std::string>{"a", "b", "", "c"}));
}

TEST(Csv, WriteRead) {
    test::TempDir dir("csv");
    csv::write(dir / "t.csv", {"x", "y"}, {{"1", "2"}, {"3", "4"}});
    const auto t = csv::read(dir / "t.csv");
    EXPECT_EQ(t.column("y"), 1u);
    EXPECT_THROW(t.column("z"), ValidationError);
    EXPECT_EQ(t.rows[1][0], "3");
    EXPECT_THROW(csv::read(dir / "missing.csv"), FormatError);
    EXPECT_THROW(csv::write(dir / "no" / "dir.csv", {"x"}, {}), FormatError);
}
