// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace incontext::cli {

using Json = nlohmann::ordered_json;

enum class Command { Learn, Edit, Generate, MatchMask, DiscoverMask };

std::string_view to_string(Command c);
std::optional<Command> command_from_string(std::string_view s);
const std::vector<Command>& all_commands();

/// Usage or configuration problem; maps to exit status 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure while running a command; maps to exit status 2.
class RunError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Command plus the full configuration tree. Every key is always present;
/// unset keys hold their defaults.
struct RunConfig {
    Command command = Command::Learn;
    Json values;

    friend bool operator==(const RunConfig& a, const RunConfig& b) {
        return a.command == b.command && a.values == b.values;
    }
};

/// Defaults of every section, taken from the library.
const Json& default_values();
RunConfig default_config(Command command);

/// Dotted path for `key`. Keys without a dot are looked up in the command's
/// own sections first, then at top level.
std::string resolve_key(Command command, std::string_view key);

/// Parses `text` with the type of the default at `key`.
void set_value(RunConfig& cfg, std::string_view key, std::string_view text);

/// `key = value` lines; `#` starts a comment.
void apply_config_text(RunConfig& cfg, std::string_view text, std::string_view origin);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Every leaf as (dotted key, value text), in tree order.
std::vector<std::pair<std::string, std::string>> flatten(const Json& values);
/// Config-file text that reproduces `cfg`.
std::string to_config_text(const RunConfig& cfg);

/// Strict reader for a manifest's "command" and "config" members.
RunConfig config_from_manifest(const Json& manifest);

/// Required inputs per command, and existence of every named input file.
void validate_inputs(const RunConfig& cfg);

/// Section object ready for the library, with its derived seed filled in.
Json library_section(const RunConfig& cfg, std::string_view section);

/// Name -> derived seed for every seeded subsystem.
Json derived_seeds(std::uint64_t master);

/// Comma-separated list value.
std::vector<std::string> split_list(std::string_view text);

}  // namespace incontext::cli
