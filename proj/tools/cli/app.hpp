// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace incontext::cli {

/// Full command line without the program name. Returns the exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// `--key=value` and `--key value` pairs left over after option parsing.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extras);

}  // namespace incontext::cli
