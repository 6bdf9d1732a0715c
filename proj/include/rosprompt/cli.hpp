#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rosprompt/defaults.hpp"

namespace rosprompt::cli {

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Environment variable naming the directory searched for a relative --config
// path that does not exist relative to the working directory.
inline constexpr const char* kConfigDirEnv = "ROSPROMPT_CONFIG_DIR";

// The complete configuration schema with bundled defaults for one
// (architecture, dataset, method) triple. Every key here is a valid config
// file key and a valid --set override key.
nlohmann::ordered_json bundled_defaults(BackendKind kind, defaults::Dataset dataset,
                                        defaults::Method method);

// Applies "dotted.key=value". The value is parsed as JSON when possible and
// taken as a string otherwise. Throws InvalidConfig for unknown keys.
void apply_override(nlohmann::ordered_json& config, std::string_view assignment);

// Merges defaults < file < overrides. `file` may be null.
nlohmann::ordered_json resolve_config(const nlohmann::ordered_json& file,
                                      const std::vector<std::string>& overrides);

// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rosprompt::cli
