#include "wattbound/rational.hpp"

#include <cctype>

namespace wattbound {

std::optional<Rat> parse_decimal(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::size_t i = 0;
  bool neg = false;
  if (text[i] == '+' || text[i] == '-') {
    neg = text[i] == '-';
    ++i;
  }
  BigInt num = 0;
  BigInt scale = 1;
  bool any_digit = false;
  bool seen_point = false;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c == '.') {
      if (seen_point) return std::nullopt;
      seen_point = true;
      continue;
    }
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    num = num * 10 + (c - '0');
    if (seen_point) scale *= 10;
    any_digit = true;
  }
  if (!any_digit) return std::nullopt;
  Rat r(num, scale);
  if (neg) r = -r;
  return r;
}

namespace {

BigInt pow10(int e) {
  BigInt p = 1;
  for (int i = 0; i < e; ++i) p *= 10;
  return p;
}

// floor(log10(a)) for a > 0.
int floor_log10(const Rat& a) {
  const BigInt& n = numerator(a);
  const BigInt& d = denominator(a);
  // Digit-count estimate, then correct by direct comparison.
  int e = static_cast<int>(n.str().size()) - static_cast<int>(d.str().size());
  auto at_least = [&](int k) {  // a >= 10^k ?
    if (k >= 0) return n >= d * pow10(k);
    return n * pow10(-k) >= d;
  };
  while (at_least(e + 1)) ++e;
  while (!at_least(e)) --e;
  return e;
}

BigInt round_half_away(const Rat& a) {  // a >= 0
  const BigInt n = numerator(a);
  const BigInt d = denominator(a);
  BigInt q = n / d;
  BigInt r = n % d;
  if (2 * r >= d) ++q;
  return q;
}

}  // namespace

Rat round_significant(const Rat& v, int digits) {
  if (v == 0) return v;
  Rat a = v < 0 ? Rat(-v) : v;
  int e = floor_log10(a);
  int shift = digits - 1 - e;
  Rat scaled = shift >= 0 ? Rat(a * pow10(shift)) : Rat(a / pow10(-shift));
  BigInt d = round_half_away(scaled);
  Rat out = shift >= 0 ? Rat(Rat(d) / pow10(shift)) : Rat(Rat(d) * pow10(-shift));
  return v < 0 ? Rat(-out) : out;
}

std::string format_sig4(const Rat& v) {
  if (v == 0) return "0";
  const bool neg = v < 0;
  Rat a = neg ? Rat(-v) : v;
  int e = floor_log10(a);
  // 4-digit mantissa in [1000, 9999]; rounding can carry to 10000.
  int shift = 3 - e;
  Rat scaled = shift >= 0 ? Rat(a * pow10(shift)) : Rat(a / pow10(-shift));
  BigInt mant = round_half_away(scaled);
  if (mant == 10000) {
    mant = 1000;
    ++e;
  }
  std::string digits = mant.str();  // exactly 4 chars
  std::string out;
  if (e >= 3) {
    out = digits + std::string(static_cast<std::size_t>(e - 3), '0');
  } else if (e >= 0) {
    out = digits.substr(0, static_cast<std::size_t>(e + 1)) + "." +
          digits.substr(static_cast<std::size_t>(e + 1));
  } else {
    out = "0." + std::string(static_cast<std::size_t>(-e - 1), '0') + digits;
  }
  if (out.find('.') != std::string::npos) {
    while (out.back() == '0') out.pop_back();
    if (out.back() == '.') out.pop_back();
  }
  return neg ? "-" + out : out;
}

double to_double(const Rat& v) { return v.convert_to<double>(); }

}  // namespace wattbound
