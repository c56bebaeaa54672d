#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace opera {

// Parses the TOML subset used by experiment configs into a JSON document:
// [table] and [dotted.table] headers, [[array-of-tables]] headers, and
// key = value pairs where value is a string, bool, integer, float, or a
// single-line array of those. Comments start with '#'. Errors carry the
// line number. This keeps config files in either format without pulling in
// a full TOML implementation.
nlohmann::json parse_toml_lite(const std::string& text);

nlohmann::json load_config_file(const std::string& path);  // .toml or .json by extension

}  // namespace opera
