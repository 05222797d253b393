// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "incontext/tensor.hpp"

#include <filesystem>
#include <string_view>

namespace incontext {

enum class Resolution { Image, Latent, Attention };
enum class ResizeMode { Nearest, Bilinear };

std::string_view to_string(Resolution r);

/// [H,W] mask with entries exactly 0 or 1, tagged with the grid it lives on.
/// Operations that mix grids must resize explicitly.
class BinaryMask {
public:
    BinaryMask(Tensor data, Resolution tag);

    static BinaryMask ones(std::size_t h, std::size_t w, Resolution tag);
    static BinaryMask zeros(std::size_t h, std::size_t w, Resolution tag);

    const Tensor& data() const noexcept { return data_; }
    Resolution resolution() const noexcept { return tag_; }
    std::size_t height() const noexcept { return data_.dim(0); }
    std::size_t width() const noexcept { return data_.dim(1); }
    bool test(std::size_t i, std::size_t j) const { return data_.at(i, j) != 0.0; }
    std::size_t count() const;
    bool any() const { return count() > 0; }

    friend bool operator==(const BinaryMask& a, const BinaryMask& b) { return a.tag_ == b.tag_ && a.data_ == b.data_; }

private:
    Tensor data_;
    Resolution tag_;
};

/// alpha + (1 - alpha) * M, values in {alpha, 1}.
struct SoftMask {
    Tensor data;
    double alpha = 0.5;
};

/// Single-channel 8-bit raster, pixel >= 128 maps to 1. Multi-channel files are
/// accepted only when every channel carries the same value.
BinaryMask load_mask(const std::filesystem::path& path, Resolution tag = Resolution::Image);
/// Writes 0/255 single-channel raster.
void save_mask(const std::filesystem::path& path, const BinaryMask& mask);

SoftMask soften(const BinaryMask& mask, double alpha);

/// Resizes a [H,W] map or a [C,H,W] stack. Nearest uses half-pixel centres;
/// bilinear is the half-pixel (align_corners=false) form with edge clamping.
Tensor resize_map(const Tensor& map, std::size_t out_h, std::size_t out_w, ResizeMode mode);
/// Transpose of the bilinear resize of an [H,W] map; used to pull gradients back
/// through cross-resolution averaging.
Tensor resize_map_adjoint(const Tensor& grad_out, std::size_t in_h, std::size_t in_w);

BinaryMask resize_nearest(const BinaryMask& mask, std::size_t out_h, std::size_t out_w, Resolution tag);
Tensor resize_bilinear(const BinaryMask& mask, std::size_t out_h, std::size_t out_w);

/// Elementwise product of an [H,W] mask with x of shape [H,W] or [C,H,W].
Tensor apply_mask(const Tensor& mask, const Tensor& x);
Tensor apply_mask(const BinaryMask& mask, const Tensor& x);

/// Min-max normalised map thresholded at `threshold`; an entry is set when it is
/// >= threshold and strictly above the minimum. Constant maps give all zeros.
BinaryMask binarize_map(const Tensor& map, double threshold, Resolution tag = Resolution::Attention);
/// Min-max normalisation; constant maps map to zeros.
Tensor min_max_normalize(const Tensor& map);

/// Keeps the largest 4-connected component (first in raster order on ties).
BinaryMask largest_component(const BinaryMask& mask);

double iou(const BinaryMask& a, const BinaryMask& b);

}  // namespace incontext
