#include "stablescale/rational.hpp"

#include <charconv>
#include <numeric>

#include "stablescale/errors.hpp"

namespace stablescale {

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw DomainError("Rational: zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  num_ = num / g;
  den_ = den / g;
}

namespace {

std::int64_t parse_integer(std::string_view text) {
  std::int64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigurationError("Rational: cannot parse integer '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

Rational Rational::parse(std::string_view text) {
  if (text.empty()) throw ConfigurationError("Rational: empty string");
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    return Rational(parse_integer(text.substr(0, slash)), parse_integer(text.substr(slash + 1)));
  }
  if (const auto dot = text.find('.'); dot != std::string_view::npos) {
    const auto frac = text.substr(dot + 1);
    if (frac.size() > 15) throw ConfigurationError("Rational: too many decimal digits");
    std::int64_t scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    const std::string digits = std::string(text.substr(0, dot)) + std::string(frac);
    return Rational(parse_integer(digits), scale);
  }
  return Rational(parse_integer(text), 1);
}

std::string Rational::to_string() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  return Rational(a.num_ * b.den_, a.den_ * b.num_);
}

Rational operator*(const Rational& a, const Rational& b) {
  return Rational(a.num_ * b.num_, a.den_ * b.den_);
}

CommonPeriod common_period(const Rational& tau1, const Rational& tau2) {
  if (tau1.num() <= 0 || tau2.num() <= 0) {
    throw DomainError("common_period: periods must be positive");
  }
  // lcm(a/b, c/d) = lcm(a, c) / gcd(b, d) for fractions in lowest terms.
  const Rational tau(std::lcm(tau1.num(), tau2.num()), std::gcd(tau1.den(), tau2.den()));
  const Rational m2 = tau / tau1;
  const Rational m1 = tau / tau2;
  return {tau, m1.num(), m2.num()};
}

}  // namespace stablescale
