#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace isoplan {

/// Exact rational arithmetic for durations measured in minutes.
///
/// Values come from decimal strings, so reduced denominators are always of
/// the form 2^a * 5^b and an exact decimal rendering exists. Components are
/// kept in int64 with __int128 intermediates; plan-scale sums stay tiny.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(long long value) : num_(value) {}  // NOLINT: implicit by design
  Rational(long long num, long long den);

  long long num() const { return num_; }
  long long den() const { return den_; }

  bool is_integer() const { return den_ == 1; }
  bool is_zero() const { return num_ == 0; }
  bool is_negative() const { return num_ < 0; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  Rational operator/(const Rational& o) const;

  bool operator==(const Rational& o) const { return num_ == o.num_ && den_ == o.den_; }
  std::strong_ordering operator<=>(const Rational& o) const;

  /// Parses an unsigned decimal literal ("35", "35.5", ".25"). No signs,
  /// exponents or grouping. Returns nullopt when the text is not a number.
  static std::optional<Rational> parse_decimal(std::string_view text);

  /// Exact decimal rendering. Requires the reduced denominator to be of the
  /// form 2^a * 5^b; min_fraction_digits pads with zeros (35 -> "35.0" at 1).
  std::string to_decimal_string(int min_fraction_digits = 0) const;

 private:
  long long num_ = 0;
  long long den_ = 1;
};

}  // namespace isoplan
