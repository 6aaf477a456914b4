#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "matchlab/simulation.hpp"

namespace matchlab {

/// Flat `key = value` text; `#` starts a comment. Duplicate keys are an error.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// Unknown keys and malformed values throw InputError.
sim::SimConfig sim_config_from(const KeyValues& kv);

}  // namespace matchlab
