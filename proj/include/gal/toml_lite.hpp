#pragma once

#include <string_view>

#include "gal/json_io.hpp"

namespace gal {

/// Parses the TOML subset used by run configs into JSON: tables, dotted
/// keys, basic and literal strings, integers, floats, booleans, arrays and
/// inline tables. Dates and multi-line strings are not supported. Throws
/// ConfigError with a line number on malformed input.
Json parse_toml(std::string_view text);

}  // namespace gal
