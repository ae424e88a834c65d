#pragma once

#include <filesystem>
#include <string_view>

#include "json.hpp"

namespace rtn::io {

/// Parses the TOML subset used by the run configs into a JSON document:
/// `[section]` / `[a.b]` tables, bare or dotted keys, strings with the usual
/// escapes, integers, floats, booleans, and single-line arrays. `#` starts a
/// comment outside strings. Duplicate keys and anything outside the subset
/// are errors (with line numbers).
nlohmann::json parse_toml_lite(std::string_view text);

/// Reads a config file as JSON or TOML: `.json` extension or a leading `{`
/// selects JSON, anything else goes through the TOML subset parser.
nlohmann::json read_config_file(const std::filesystem::path& path);

}  // namespace rtn::io
