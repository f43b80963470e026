#include "isoplan/rational.hpp"

#include <cctype>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

namespace isoplan {

namespace {

using int128 = __int128;

long long checked_ll(int128 v) {
  if (v > INT64_MAX || v < INT64_MIN) {
    throw std::overflow_error("rational component out of range");
  }
  return static_cast<long long>(v);
}

}  // namespace

Rational::Rational(long long num, long long den) : num_(num), den_(den) {
  if (den_ == 0) throw std::invalid_argument("rational with zero denominator");
  if (den_ < 0) {
    num_ = -num_;
    den_ = -den_;
  }
  long long g = std::gcd(num_ < 0 ? -num_ : num_, den_);
  if (g > 1) {
    num_ /= g;
    den_ /= g;
  }
  if (num_ == 0) den_ = 1;
}

Rational Rational::operator+(const Rational& o) const {
  int128 n = int128(num_) * o.den_ + int128(o.num_) * den_;
  int128 d = int128(den_) * o.den_;
  long long g = std::gcd(checked_ll(n < 0 ? -n : n), checked_ll(d));
  if (g == 0) g = 1;
  return Rational(checked_ll(n / g), checked_ll(d / g));
}

Rational Rational::operator-(const Rational& o) const {
  return *this + Rational(-o.num_, o.den_);
}

Rational Rational::operator*(const Rational& o) const {
  long long g1 = std::gcd(num_ < 0 ? -num_ : num_, o.den_);
  long long g2 = std::gcd(o.num_ < 0 ? -o.num_ : o.num_, den_);
  int128 n = int128(num_ / g1) * (o.num_ / g2);
  int128 d = int128(den_ / g2) * (o.den_ / g1);
  return Rational(checked_ll(n), checked_ll(d));
}

Rational Rational::operator/(const Rational& o) const {
  if (o.num_ == 0) throw std::domain_error("rational division by zero");
  return *this * Rational(o.den_, o.num_);
}

std::strong_ordering Rational::operator<=>(const Rational& o) const {
  int128 lhs = int128(num_) * o.den_;
  int128 rhs = int128(o.num_) * den_;
  if (lhs < rhs) return std::strong_ordering::less;
  if (lhs > rhs) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::optional<Rational> Rational::parse_decimal(std::string_view text) {
  if (text.empty()) return std::nullopt;
  size_t i = 0;
  long long int_part = 0;
  int digits = 0;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    if (digits > 17) return std::nullopt;
    int_part = int_part * 10 + (text[i] - '0');
    ++digits;
    ++i;
  }
  long long frac_part = 0;
  int frac_digits = 0;
  if (i < text.size() && text[i] == '.') {
    ++i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      if (frac_digits > 9) return std::nullopt;
      frac_part = frac_part * 10 + (text[i] - '0');
      ++frac_digits;
      ++i;
    }
  }
  if (i != text.size()) return std::nullopt;
  if (digits == 0 && frac_digits == 0) return std::nullopt;
  long long den = 1;
  for (int k = 0; k < frac_digits; ++k) den *= 10;
  int128 num = int128(int_part) * den + frac_part;
  return Rational(checked_ll(num), den);
}

std::string Rational::to_decimal_string(int min_fraction_digits) const {
  long long d = den_;
  int twos = 0;
  int fives = 0;
  while (d % 2 == 0) {
    d /= 2;
    ++twos;
  }
  while (d % 5 == 0) {
    d /= 5;
    ++fives;
  }
  if (d != 1) {
    throw std::domain_error("rational has no finite decimal expansion");
  }
  int shift = twos > fives ? twos : fives;
  int128 scaled = int128(num_ < 0 ? -num_ : num_);
  for (int k = 0; k < shift; ++k) scaled *= 10;
  scaled /= den_;

  std::string digits;
  if (scaled == 0) digits = "0";
  while (scaled > 0) {
    digits.insert(digits.begin(), static_cast<char>('0' + int(scaled % 10)));
    scaled /= 10;
  }
  int frac = shift;
  while (static_cast<int>(digits.size()) <= frac) digits.insert(digits.begin(), '0');

  std::string out;
  if (num_ < 0) out += '-';
  out += digits.substr(0, digits.size() - frac);
  std::string frac_digits = digits.substr(digits.size() - frac);
  while (!frac_digits.empty() && frac_digits.back() == '0') frac_digits.pop_back();
  while (static_cast<int>(frac_digits.size()) < min_fraction_digits) frac_digits += '0';
  if (!frac_digits.empty()) {
    out += '.';
    out += frac_digits;
  }
  return out;
}

}  // namespace isoplan
