// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "config.hpp"

#include <filesystem>
#include <string>

namespace incontext::cli {

struct RunOptions {
    bool force = false;  // replace a non-empty output directory
};

struct RunOutcome {
    int exit_code = kExitOk;
    std::string message;  // error text when exit_code != 0
    Json manifest;        // as written, or null when nothing was written
};

/// Runs one command end to end. Artifacts are staged next to the output
/// directory and moved into place only on success; a failed run leaves just a
/// manifest with status "failed". Never throws.
RunOutcome run(RunConfig cfg, const RunOptions& options);

Json read_manifest(const std::filesystem::path& path);

}  // namespace incontext::cli
