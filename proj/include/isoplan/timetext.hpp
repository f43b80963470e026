#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "isoplan/rational.hpp"

namespace isoplan::timetext {

enum class UnitFamily { Minute, Hour, Day, Week };

/// Minutes in one unit of the family.
long long family_minutes(UnitFamily family);

/// Maps a unit word ("min", "hrs", "Hour", "weeks", ...) to its family.
/// Case-insensitive; unknown words map to nullopt.
std::optional<UnitFamily> unit_family(std::string_view word);

/// Parses a duration expression into minutes: "<number>" (minutes assumed),
/// or "<number> <unit>". A single trailing period is tolerated. Negative or
/// signed numbers are rejected.
std::optional<Rational> parse_duration(std::string_view text);

/// "1 hour", "3 hours", "2 days", ... for an integral count in the family.
std::string count_with_unit(long long count, UnitFamily family);

/// The unit family a duration text is written in; bare numbers are minutes.
/// nullopt when the text does not parse as a duration.
std::optional<UnitFamily> duration_text_family(std::string_view text);

}  // namespace isoplan::timetext
