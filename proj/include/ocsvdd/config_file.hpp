#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ocsvdd/loo.hpp"

namespace ocsvdd {

using Setting = std::pair<std::string, std::string>;

// `key = value` lines; `#` starts a comment; blank lines ignored. Keys keep
// file order. Malformed lines raise ParseError.
std::vector<Setting> parse_config(std::string_view text, const std::string& source);
std::vector<Setting> load_config(const std::filesystem::path& path);

// Recognized keys:
//   seed latent hidden final_bias epochs lr batch center_floor
//   L meta_batch eta support query_in query_out meta_lr meta_steps
//   inference_hidden shared_meta
// `seed` sets both the OC-SVDD and meta seeds. Lists are comma separated.
// Throws ConfigError on unknown keys or bad values.
void apply_setting(LooConfig& config, const std::string& key, const std::string& value);
void apply_settings(LooConfig& config, const std::vector<Setting>& settings);

}  // namespace ocsvdd
