#include "isoplan/timetext.hpp"

#include <algorithm>
#include <cctype>

namespace isoplan::timetext {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

long long family_minutes(UnitFamily family) {
  switch (family) {
    case UnitFamily::Minute: return 1;
    case UnitFamily::Hour: return 60;
    case UnitFamily::Day: return 1440;
    case UnitFamily::Week: return 10080;
  }
  return 1;
}

std::optional<UnitFamily> unit_family(std::string_view word) {
  std::string w = lower(word);
  if (w == "min" || w == "mins" || w == "minute" || w == "minutes") return UnitFamily::Minute;
  if (w == "h" || w == "hr" || w == "hrs" || w == "hour" || w == "hours") return UnitFamily::Hour;
  if (w == "day" || w == "days") return UnitFamily::Day;
  if (w == "week" || w == "weeks") return UnitFamily::Week;
  return std::nullopt;
}

std::optional<Rational> parse_duration(std::string_view text) {
  std::string_view s = trim(text);
  if (!s.empty() && s.back() == '.') {
    // Allow one sentence-final period, but keep "35." intact as a number.
    std::string_view without = s.substr(0, s.size() - 1);
    if (!without.empty() && !std::isdigit(static_cast<unsigned char>(without.back()))) {
      s = trim(without);
    } else if (without.find(' ') != std::string_view::npos) {
      s = trim(without);
    }
  }
  if (s.empty()) return std::nullopt;

  size_t i = 0;
  while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
  std::string_view number = s.substr(0, i);
  std::string_view rest = trim(s.substr(i));

  auto value = Rational::parse_decimal(number);
  if (!value) return std::nullopt;
  if (rest.empty()) return value;

  auto family = unit_family(rest);
  if (!family) return std::nullopt;
  return *value * Rational(family_minutes(*family));
}

std::optional<UnitFamily> duration_text_family(std::string_view text) {
  std::string_view s = trim(text);
  if (!s.empty() && s.back() == '.') {
    std::string_view without = s.substr(0, s.size() - 1);
    if (!without.empty() && !std::isdigit(static_cast<unsigned char>(without.back()))) {
      s = trim(without);
    } else if (without.find(' ') != std::string_view::npos) {
      s = trim(without);
    }
  }
  size_t i = 0;
  while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
  std::string_view number = s.substr(0, i);
  std::string_view rest = trim(s.substr(i));
  if (!Rational::parse_decimal(number)) return std::nullopt;
  if (rest.empty()) return UnitFamily::Minute;
  return unit_family(rest);
}

std::string count_with_unit(long long count, UnitFamily family) {
  std::string unit;
  switch (family) {
    case UnitFamily::Minute: unit = "min"; break;
    case UnitFamily::Hour: unit = count == 1 ? "hour" : "hours"; break;
    case UnitFamily::Day: unit = count == 1 ? "day" : "days"; break;
    case UnitFamily::Week: unit = count == 1 ? "week" : "weeks"; break;
  }
  return std::to_string(count) + " " + unit;
}

}  // namespace isoplan::timetext
