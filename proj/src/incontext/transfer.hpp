// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "incontext/backend.hpp"
#include "incontext/masking.hpp"

#include <optional>
#include <string>
#include <vector>

namespace incontext {

enum class BlendMode { NoiseMatched, FixedStart };

std::string_view to_string(BlendMode mode);
BlendMode blend_mode_from_string(std::string_view s);

inline constexpr int kRecommendedTStartMin = 5;
inline constexpr int kRecommendedTStartMax = 15;

struct EditConfig {
    int t_start = 10;
    double eta = 0.05;
    int guidance_iters_per_step = 1;
    BlendMode blend_mode = BlendMode::NoiseMatched;
    std::uint64_t seed = 0;

    void validate(int T) const;
    friend bool operator==(const EditConfig&, const EditConfig&) = default;
};

/// Warning text when t_start lies outside the recommended window.
std::optional<std::string> t_start_warning(int t_start);

struct NoisedStart {
    LatentImage x_start;
    Tensor eps;
};

/// x_tg noised to t_start with seeded noise; t_start == 0 returns x_tg.
NoisedStart noise_to_tstart(const LatentImage& x_tg, int t_start, const DiffusionSchedule& sched, std::uint64_t seed);

/// mask ? x_t : reference, per latent position and channel.
LatentImage blend_step(const LatentImage& x_t, const LatentImage& reference, const BinaryMask& mask_latent);

struct GuidanceEval {
    double objective = 0.0;
    Tensor grad;  // d objective / d x, empty unless requested
};

/// Mean over upsampling layers of sum((CA(token) - M)^2), M the mask resized
/// bilinearly to the common attention grid.
GuidanceEval guidance_objective(const Backend& backend, const LatentImage& x, const TextEmbedding& c,
                                std::string_view token, int t, const BinaryMask& mask, bool with_grad);

/// x - eta * grad of guidance_objective. eta == 0 returns x unchanged.
LatentImage guidance_step(const Backend& backend, const LatentImage& x, const TextEmbedding& c, std::string_view token,
                          int t, const BinaryMask& mask, double eta);

struct EditStepTrace {
    int t = 0;
    double objective_before = 0.0;  // at x'_t
    double objective_after = 0.0;   // at x''_t
};

struct EditResult {
    Tensor image;
    LatentImage latent;
    LatentImage x_tg;
    std::vector<EditStepTrace> trace;
    std::vector<std::string> warnings;
    /// Guidance objective after the last guidance step, 0 when no step ran.
    double final_objective = 0.0;
};

/// Blended editing of the masked region of `image` with attention guidance on
/// `token`. `backend` is the concept-tuned model.
EditResult edit_image(const Backend& backend, const ConceptToken& token, const Tensor& image, const BinaryMask& mask,
                      std::string_view prompt, const EditConfig& cfg);

inline constexpr const char* kBasePromptTemplate = "a photo of an {OBJECT}";
inline constexpr const char* kConceptPromptTemplate = "a photo of an {OBJECT}, with [v*] style";

struct GenerationConfig {
    int t_s = 5;
    std::string object_class = "object";
    std::uint64_t seed = 0;
    std::string base_prompt = kBasePromptTemplate;
    std::string concept_prompt = kConceptPromptTemplate;

    void validate(int T) const;
    friend bool operator==(const GenerationConfig&, const GenerationConfig&) = default;
};

struct GenerationResult {
    Tensor image;
    LatentImage latent;
};

/// Seeded Gaussian at t = T; the first t_s steps use `base` with the base
/// prompt, the rest use `tuned` with the concept prompt.
GenerationResult generate_with_concept(const Backend& base, const Backend& tuned, const ConceptToken& token,
                                       const GenerationConfig& cfg);

}  // namespace incontext
