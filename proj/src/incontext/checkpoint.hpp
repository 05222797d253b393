// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "incontext/concept_learning.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace incontext {

/// Layout, all integers little-endian:
///   "ICCKPT01" | u32 version | u64 manifest bytes | manifest JSON
///   | u64 payload doubles | payload f64[] | SHA-256 of everything before it
/// The manifest lists the token and every delta tensor with its payload offset.
std::vector<std::uint8_t> serialize_checkpoint(const ConceptCheckpoint& ckpt);
ConceptCheckpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const ConceptCheckpoint& ckpt, const std::filesystem::path& path);
ConceptCheckpoint load_checkpoint(const std::filesystem::path& path);

/// CSV with header step,l_con,l_att,l_roi,l_tot,t.
void write_loss_trace(const std::filesystem::path& path, std::span<const LossRecord> trace);

}  // namespace incontext
