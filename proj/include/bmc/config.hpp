#pragma once

#include <stdexcept>
#include <string>

#include "bmc/studies.hpp"

namespace bmc {

/// Configuration error naming the offending field; the CLI maps it to exit 2.
struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(std::string f, const std::string& what)
        : std::runtime_error("config field '" + f + "': " + what), field(std::move(f)) {}
};

/// Builds a study configuration from a JSON document. `seed_override` and
/// `threads_override` (from CLI flags) replace the config values when >= 0.
StudyConfig parse_study_config(const ordered_json& doc, long long seed_override = -1,
                               int threads_override = -1);

/// Parses the config text, which must be valid UTF-8 JSON.
ordered_json parse_config_text(const std::string& text);

ordered_json load_json_file(const std::string& path);

}  // namespace bmc
