#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace stablescale {

/// Exact positive-or-zero rational, always stored in lowest terms with a
/// positive denominator. Used for periods so that period ratios stay exact.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);

  /// Parses "p/q", "p", or a terminating decimal such as "0.25".
  static Rational parse(std::string_view text);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string to_string() const;

  friend bool operator==(const Rational&, const Rational&) = default;
  friend Rational operator/(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// Smallest tau = m2 * tau1 = m1 * tau2 with positive integers m1, m2.
struct CommonPeriod {
  Rational tau;
  std::int64_t m1 = 1;
  std::int64_t m2 = 1;
};

CommonPeriod common_period(const Rational& tau1, const Rational& tau2);

}  // namespace stablescale
