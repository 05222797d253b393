// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "incontext/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace incontext {

/// 8-bit raster as read from disk, interleaved, 1 to 4 channels.
struct Raster8 {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;
};

/// Reads PNG (.png) or binary netpbm (.pgm/.ppm). PNG files are decoded as RGBA;
/// netpbm keeps its native channel count.
Raster8 read_raster(const std::filesystem::path& path);
/// Writes PNG or netpbm depending on the extension. channels must be 1 or 3.
void write_raster(const std::filesystem::path& path, const Raster8& raster);

/// RGB image as a [3,H,W] tensor in [0,1].
Tensor load_image(const std::filesystem::path& path);
/// Clips to [0,1], rounds to 8 bits and writes an RGB raster.
void save_image(const std::filesystem::path& path, const Tensor& image);

Tensor image_from_raster(const Raster8& raster);
Raster8 raster_from_image(const Tensor& image);

}  // namespace incontext
