// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "incontext/augment.hpp"
#include "incontext/backend.hpp"

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace incontext {

inline constexpr const char* kContextTemplate = "A {OBJECT} with [v*] style";
inline constexpr const char* kRoiTemplate = "A photo of [v*]";

/// Substitutes {OBJECT} and points the token placeholder ("[v*]" or
/// "[<token_name>]") at `token_name`. Both placeholders must be present.
std::string build_prompt(std::string_view tmpl, std::string_view object_class, std::string_view token_name,
                         ZoomTag zoom = ZoomTag::None);
/// Template without an {OBJECT} slot, such as the RoI prompt.
std::string build_token_prompt(std::string_view tmpl, std::string_view token_name);

enum class OptimizerKind { Adam };

struct TrainingConfig {
    int steps = 500;
    double learning_rate = 1e-5;
    double lambda_att = 0.5;
    double lambda_roi = 0.5;
    double alpha = 0.5;
    std::uint64_t seed = 0;
    AugmentationConfig augmentation;
    OptimizerKind optimizer = OptimizerKind::Adam;
    std::string init_word = "style";
    std::string token_name = "v*";

    void validate() const;
    friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

/// First/second-moment optimizer with bias correction, keyed by parameter name.
class Adam {
public:
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

    /// Starts a new optimisation step; call once before the apply() calls of a step.
    void next_step() { ++t_; }
    void apply(const std::string& name, Tensor& param, const Tensor& grad);
    int step_count() const noexcept { return t_; }

private:
    struct Moments {
        Tensor m, v;
    };
    double lr_, b1_, b2_, eps_;
    int t_ = 0;
    std::map<std::string, Moments> moments_;
};

struct LossRecord {
    int step = 0;
    int t = 0;
    double l_con = 0, l_att = 0, l_roi = 0, l_tot = 0;
};

/// Fixed (t, eps) draw used to compare losses before and after training.
struct LossProbe {
    int t = 1;
    Tensor eps;
};

std::vector<LossProbe> make_loss_probes(const Backend& backend, std::size_t count, std::uint64_t seed);

/// One step's worth of the three losses and their gradients.
struct LossEvaluation {
    LossRecord losses;
    Tensor grad_token;    // d l_tot / d v*
    ParameterMap grad_params;  // d l_tot / d trainable params
};

/// Evaluates all three losses on the given sample with a fixed draw.
LossEvaluation evaluate_concept_losses(const Backend& backend, const ConceptToken& token, const SourceSample& sample,
                                       ZoomTag zoom, const TrainingConfig& cfg, int t, const Tensor& eps,
                                       bool with_gradients);

/// Mean over probes of the losses on the unaugmented sample.
LossRecord mean_probe_losses(const Backend& backend, const ConceptToken& token, const SourceSample& sample,
                             const TrainingConfig& cfg, std::span<const LossProbe> probes);

/// Learned token plus the fine-tuned cross-attention weights, stored as deltas
/// against the base backend.
struct ConceptCheckpoint {
    static constexpr int kVersion = 1;

    int version = kVersion;
    ConceptToken token;
    ParameterMap ca_weight_deltas;
    TrainingConfig config;
    BackendDescriptor backend;
    std::string base_digest;  // parameter digest of the backend the deltas apply to
    std::string source_digest;
};

struct TrainingResult {
    ConceptCheckpoint checkpoint;
    std::vector<LossRecord> trace;
};

/// SHA-256 over the source image and mask tensors.
std::string source_digest(const SourceSample& sample);

/// Optimises v* and the cross-attention key/value projections of a copy of
/// `base`. `base` itself is not modified. `on_step` sees every loss record.
TrainingResult train_concept(const Backend& base, const SourceSample& sample, const TrainingConfig& cfg,
                             const std::function<void(const LossRecord&)>& on_step = {});

/// Copy of `base` with the checkpoint deltas added. Throws when the checkpoint
/// was trained on a backend of different geometry.
std::unique_ptr<Backend> apply_checkpoint(const Backend& base, const ConceptCheckpoint& ckpt);

}  // namespace incontext
