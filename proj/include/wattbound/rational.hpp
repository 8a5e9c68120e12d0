#ifndef WATTBOUND_RATIONAL_HPP
#define WATTBOUND_RATIONAL_HPP

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace wattbound {

// All energy/time bookkeeping is done in exact rationals so that bounds,
// trace totals and conservation checks compare exactly and goldens are
// bit-stable across platforms. Values are converted to decimal only at
// the reporting edge.
using Rat = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Parses a plain decimal literal ("20", "-1.3", "0.0025") into an exact
// rational. Exponents are not accepted; model files use unit-scaled keys
// (mW, ns) instead.
std::optional<Rat> parse_decimal(std::string_view text);

// Rounds to `digits` significant decimal digits, half away from zero.
Rat round_significant(const Rat& v, int digits);

// Decimal rendering with 4 significant digits; trailing fractional zeros
// are trimmed ("0.316", "30", "141.4"). The output is a valid JSON number.
std::string format_sig4(const Rat& v);

double to_double(const Rat& v);

}  // namespace wattbound

#endif
