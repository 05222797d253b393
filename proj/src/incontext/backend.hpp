// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "incontext/schedule.hpp"
#include "incontext/tensor.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace incontext {

/// A learned text token such as "v*" or "w*".
struct ConceptToken {
    std::string name;
    Tensor embedding;  // [embed_dim]
    std::string init_source;
};

struct TokenSlot {
    std::size_t position = 0;
    std::string token;        // concept name or vocabulary word
    bool is_concept = false;
};

struct TextEmbedding {
    Tensor data;  // [num_tokens, embed_dim]
    std::vector<TokenSlot> slots;

    std::size_t num_tokens() const { return data.dim(0); }
    /// Position of a concept token; throws when the prompt does not contain it.
    std::size_t position_of(std::string_view concept_name) const;
    std::optional<std::size_t> find(std::string_view concept_name) const;
};

enum class LayerTag { Down, Mid, Up };

/// Per-layer softmax attention, each map shaped [heads, num_text_tokens, h, w].
struct CrossAttentionRecord {
    std::vector<Tensor> maps;
    std::vector<LayerTag> layer_tags;
};

enum class BackendKind { Toy, External };
enum class TrainableSelector { CrossAttentionKV, FreezeAll };

struct BackendDescriptor {
    BackendKind kind = BackendKind::Toy;
    std::size_t channels = 0, height = 0, width = 0;  // latent shape
    int scale_factor = 1;
    std::vector<std::pair<std::size_t, std::size_t>> attention_resolutions;
    std::string trainable_selector = "cross-attention key/value projections";
    std::uint64_t seed = 0;
    std::size_t embed_dim = 0, num_heads = 0, head_dim = 0;
    int timesteps = 0;
};

using ParameterMap = std::map<std::string, Tensor>;

/// Gradients of a scalar with respect to every differentiable input.
struct Gradients {
    Tensor latent;        // same shape as x_t
    Tensor text;          // [num_tokens, embed_dim]
    ParameterMap params;  // by parameter name, every parameter present
};

/// Backend-private forward state kept for the backward pass.
class ForwardCache {
public:
    virtual ~ForwardCache() = default;
};

struct Prediction {
    Tensor eps;  // same shape as x_t
    CrossAttentionRecord attention;
    std::shared_ptr<const ForwardCache> cache;
};

/// Adapter contract over a latent text-to-image denoiser.
class Backend {
public:
    virtual ~Backend() = default;

    virtual BackendDescriptor descriptor() const = 0;
    virtual const DiffusionSchedule& schedule() const = 0;
    virtual std::unique_ptr<Backend> clone() const = 0;

    virtual LatentImage encode_image(const Tensor& image) const = 0;
    virtual Tensor decode_latent(const LatentImage& latent) const = 0;

    /// Tokenises `prompt`; "[name]" placeholders resolve to `tokens`.
    virtual TextEmbedding encode_prompt(std::string_view prompt, std::span<const ConceptToken> tokens) const = 0;
    virtual Tensor word_embedding(std::string_view word) const = 0;

    virtual Prediction predict_noise(const LatentImage& x_t, const TextEmbedding& c, int t) const = 0;
    /// Pulls d(loss)/d(eps) and d(loss)/d(attention maps) back to the latent, the
    /// text embedding and every parameter. Either upstream gradient may be null.
    virtual Gradients backward(const Prediction& pred, const Tensor* grad_eps,
                               const std::vector<Tensor>* grad_maps) const = 0;

    virtual const ParameterMap& parameters() const = 0;
    virtual ParameterMap& mutable_parameters() = 0;
    /// Names of the tunable denoiser parameters. Concept tokens are always tunable
    /// and are owned by the caller, not listed here.
    virtual std::vector<std::string> trainable_params(TrainableSelector selector) const = 0;
};

/// Sum of the text-embedding gradient rows occupied by `concept_name`.
Tensor token_gradient(const TextEmbedding& c, const Tensor& grad_text, std::string_view concept_name);

/// SHA-256 over the named parameters, or over all parameters not in `exclude`.
std::string parameter_digest(const ParameterMap& params, std::span<const std::string> exclude = {});

/// Tensors of `tuned` minus `base` for the given names.
ParameterMap parameter_deltas(const ParameterMap& base, const ParameterMap& tuned, std::span<const std::string> names);
void apply_deltas(ParameterMap& params, const ParameterMap& deltas);

}  // namespace incontext
