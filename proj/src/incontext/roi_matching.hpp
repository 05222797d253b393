// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "incontext/concept_learning.hpp"

#include <string>
#include <vector>

namespace incontext {

inline constexpr const char* kTargetRegionTemplate = "a [w*] region of an {OBJECT}";
inline constexpr const char* kCommonConceptTemplate = "An {OBJECT} with [w*] style";

enum class RegionPurpose { TargetMatching, SourceDiscovery };

struct RegionToken {
    ConceptToken token;
    RegionPurpose trained_for = RegionPurpose::TargetMatching;
    std::string object_class;
};

struct RegionTrainingConfig {
    int steps = 500;
    double learning_rate = 1e-5;
    std::uint64_t seed = 0;
    std::string token_name = "w*";
    std::string init_word = "style";  // fresh tokens only; the target matcher starts from v*
    AugmentationConfig augmentation = AugmentationConfig::disabled();

    void validate(bool allow_zero_steps) const;
    friend bool operator==(const RegionTrainingConfig&, const RegionTrainingConfig&) = default;
};

struct ExtractionConfig {
    std::vector<int> probe_timesteps{10, 25, 40};
    double threshold = 0.5;
    bool largest_component = true;
    std::uint64_t seed = 0;

    void validate(int T) const;
    friend bool operator==(const ExtractionConfig&, const ExtractionConfig&) = default;
};

struct MatchResult {
    BinaryMask mask;  // image resolution
    Tensor raw_map;   // attention grid, min-max normalised
    double confidence = 0.0;
};

struct RegionTrainingResult {
    RegionToken region;
    ParameterMap ca_weight_deltas;  // empty for the target matcher
    std::vector<double> loss_trace;
};

/// Optimises only a w* initialised from v* against the attention loss on the
/// source sample. `backend` is the concept-tuned model and stays frozen.
RegionTrainingResult learn_target_matcher(const Backend& backend, const ConceptToken& v_star,
                                          const SourceSample& source, const RegionTrainingConfig& cfg);

/// Optimises a fresh w* and the cross-attention K/V on the plain diffusion loss
/// over at least two images, one image drawn per step.
RegionTrainingResult learn_common_concept_token(const Backend& base, std::span<const Tensor> images,
                                                const std::string& object_class, const RegionTrainingConfig& cfg);

/// Prompt the token was trained with.
std::string region_prompt(const RegionToken& region);

/// Averages the w* maps over the probe timesteps, normalises, thresholds and
/// upsamples to image resolution. Throws EmptyMaskError on a constant map.
MatchResult extract_mask(const Backend& backend, const RegionToken& region, const Tensor& image,
                         const ExtractionConfig& cfg);
MatchResult extract_target_mask(const Backend& backend, const RegionToken& region, const Tensor& image,
                                const ExtractionConfig& cfg);
MatchResult extract_source_mask(const Backend& backend, const RegionToken& region, const Tensor& image,
                                const ExtractionConfig& cfg);

/// Mean attention loss of w* over fixed probes; used to compare before/after.
double mean_probe_attention_loss(const Backend& backend, const RegionToken& region, const SourceSample& source,
                                 std::span<const LossProbe> probes);
/// Mean diffusion loss over images and fixed probes.
double mean_probe_diffusion_loss(const Backend& backend, const RegionToken& region, std::span<const Tensor> images,
                                 std::span<const LossProbe> probes);

}  // namespace incontext
