#pragma once

#include <filesystem>
#include <string_view>

#include <json.hpp>

namespace bisimkit {

// Parses the TOML subset used by experiment configs into JSON: [table] and
// [dotted.table] headers, bare or quoted keys, basic and literal strings,
// integers, floats, booleans, arrays (may span lines) and inline tables.
// Dates, array-of-tables and multi-line strings are rejected. Errors throw
// ConfigError with the line number.
nlohmann::json parse_toml(std::string_view text);

// JSON or TOML by file extension (.json, otherwise TOML).
nlohmann::json load_config_document(const std::filesystem::path& path);

}  // namespace bisimkit
