#pragma once

#include <string>
#include <string_view>

namespace evorep {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

/// Parses a full decimal token; throws DataError naming `context` on failure.
double parse_double(std::string_view token, std::string_view context);

}  // namespace evorep
