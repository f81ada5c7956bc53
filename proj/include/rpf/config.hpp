#pragma once

#include "rpf/error.hpp"

#include "json.hpp"

#include <filesystem>
#include <string_view>

namespace rpf {

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Parses the TOML subset used by experiment configs into a JSON object:
/// [tables] and [dotted.tables], bare/quoted/dotted keys, basic and literal
/// strings, integers, floats, booleans, (multi-line) arrays and inline
/// tables. Dates, multi-line strings and arrays of tables are rejected.
/// Errors carry the 1-based line number.
nlohmann::json parse_toml(std::string_view text);

nlohmann::json load_toml(const std::filesystem::path& path);

}  // namespace rpf
