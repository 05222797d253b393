// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "incontext/masking.hpp"
#include "incontext/random.hpp"

#include <array>
#include <optional>
#include <string>

namespace incontext {

/// Source image with the mask of the concept region and the host object word.
struct SourceSample {
    Tensor image;  // [3,H,W] in [0,1]
    BinaryMask mask;
    std::string object_class;
    std::string prompt_template = "A {OBJECT} with [v*] style";

    /// Throws when the mask and image disagree or the object word is empty.
    void validate() const;
};

struct AugmentationConfig {
    double p_hflip = 0.5;
    double p_grayscale = 0.1;
    double p_zoom = 0.3;
    double p_jitter = 0.3;
    double zoom_min = 0.6;
    double zoom_max = 1.4;
    double jitter_brightness = 0.2;
    double jitter_contrast = 0.2;
    double jitter_saturation = 0.2;

    static AugmentationConfig disabled();
    void validate() const;

    friend bool operator==(const AugmentationConfig&, const AugmentationConfig&) = default;
};

enum class ZoomTag { None, In, Out };

struct AugmentedSample {
    SourceSample sample;
    ZoomTag zoom = ZoomTag::None;
};

SourceSample hflip(const SourceSample& s);
Tensor grayscale(const Tensor& image);
/// Scales content about the image centre. scale < 1 pads with mid-gray (image)
/// and zeros (mask); the image is resampled bilinearly, the mask by nearest.
SourceSample zoom(const SourceSample& s, double scale);
Tensor color_jitter(const Tensor& image, double brightness, double contrast, double saturation);

/// Sampled augmentation decisions.
struct AugmentPlan {
    bool flip = false;
    bool gray = false;
    std::optional<double> zoom_scale;
    std::optional<std::array<double, 3>> jitter;  // brightness, contrast, saturation factors
};

/// Draws every decision from `rng` whether or not the transform fires, so the
/// stream position after a call does not depend on the outcomes.
AugmentPlan draw_plan(const AugmentationConfig& cfg, Rng& rng);
/// Geometric ops (flip, zoom) act on image and mask; photometric ops on the image only.
AugmentedSample apply_plan(const SourceSample& s, const AugmentPlan& plan);

AugmentedSample augment(const SourceSample& s, const AugmentationConfig& cfg, Rng& rng);

}  // namespace incontext
