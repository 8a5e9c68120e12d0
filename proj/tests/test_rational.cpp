#include "doctest.h"
#include "wattbound/rational.hpp"

using namespace wattbound;

TEST_CASE("parse_decimal accepts plain decimals exactly") {
  CHECK(*parse_decimal("0.316") == Rat(316, 1000));
  CHECK(*parse_decimal("-2.5") == Rat(-5, 2));
  CHECK(*parse_decimal("+17") == Rat(17));
  CHECK(*parse_decimal("000.250") == Rat(1, 4));
  CHECK(*parse_decimal(".5") == Rat(1, 2));
  CHECK(*parse_decimal("12.") == Rat(12));
}

TEST_CASE("parse_decimal rejects malformed input") {
  CHECK(!parse_decimal(""));
  CHECK(!parse_decimal("1e3"));
  CHECK(!parse_decimal("1.2.3"));
  CHECK(!parse_decimal("-"));
  CHECK(!parse_decimal("."));
  CHECK(!parse_decimal("12 "));
  CHECK(!parse_decimal("0x12"));
}

TEST_CASE("round_significant rounds half away from zero") {
  CHECK(round_significant(Rat(31459, 10000), 4) == Rat(3146, 1000));
  CHECK(round_significant(Rat(12345, 100000), 4) == Rat(1235, 10000));
  CHECK(round_significant(Rat(-12345, 100000), 4) == Rat(-1235, 10000));
  CHECK(round_significant(Rat(12335, 100000), 4) == Rat(1234, 10000));  // .5 rounds up
  CHECK(round_significant(Rat(0), 4) == Rat(0));
  CHECK(round_significant(Rat(999999), 4) == Rat(1000000));
  CHECK(round_significant(Rat(1, 3), 2) == Rat(33, 100));
}

TEST_CASE("format_sig4 renders four significant digits") {
  CHECK(format_sig4(Rat(316, 1000)) == "0.316");
  CHECK(format_sig4(Rat(30)) == "30");
  CHECK(format_sig4(Rat(1414, 10)) == "141.4");
  CHECK(format_sig4(Rat(1414, 10000)) == "0.1414");
  CHECK(format_sig4(Rat(0)) == "0");
  CHECK(format_sig4(Rat(-1, 3)) == "-0.3333");
  CHECK(format_sig4(Rat(123456789)) == "123500000");
  CHECK(format_sig4(Rat(99995, 10)) == "10000");  // carry into the next decade
  CHECK(format_sig4(Rat(1, 1000000)) == "0.000001");
  CHECK(format_sig4(Rat(2, 3)) == "0.6667");
  CHECK(format_sig4(Rat(1000)) == "1000");
  CHECK(format_sig4(Rat(10000)) == "10000");
  CHECK(format_sig4(Rat(12, 1)) == "12");
}

TEST_CASE("format_sig4 agrees with round_significant") {
  // Rendering then reparsing returns exactly the 4-digit rounded value.
  const Rat samples[] = {Rat(355, 113), Rat(1, 7), Rat(123456, 7), Rat(-9876, 10000)};
  for (const Rat& s : samples) {
    Rat rounded = round_significant(s, 4);
    CHECK(*parse_decimal(format_sig4(s)) == rounded);
  }
}

TEST_CASE("to_double sanity") {
  CHECK(to_double(Rat(1, 2)) == doctest::Approx(0.5));
  CHECK(to_double(Rat(-3, 4)) == doctest::Approx(-0.75));
}
