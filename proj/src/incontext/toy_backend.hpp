// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "incontext/backend.hpp"
#include "incontext/masking.hpp"

#include <filesystem>

namespace incontext {

struct ToyConfig {
    std::uint64_t seed = 0;
    std::size_t channels = 3;
    std::size_t height = 16;
    std::size_t width = 16;
    std::size_t embed_dim = 16;
    std::size_t num_heads = 2;
    std::size_t head_dim = 8;
    int timesteps = 50;

    friend bool operator==(const ToyConfig&, const ToyConfig&) = default;
};

/// Desk-scale denoiser: identity image codec, hashed word embeddings and a single
/// cross-attention layer (tagged as an upsampling block) followed by a linear
/// head. The head predicts a clean latent which is converted to a noise
/// prediction with the schedule, so the whole pass is differentiable in closed
/// form.
///
/// Queries: to_q * x_n + q_pos[n] + to_q_time * tau(t). Keys and values are
/// linear in the text embedding. Only to_k / to_v are tunable.
class ToyBackend final : public Backend {
public:
    static constexpr const char* kToQ = "ca.up0.to_q";
    static constexpr const char* kQueryPos = "ca.up0.q_pos";
    static constexpr const char* kToQTime = "ca.up0.to_q_time";
    static constexpr const char* kToK = "ca.up0.to_k";
    static constexpr const char* kToV = "ca.up0.to_v";
    static constexpr const char* kHeadOut = "head.out";
    static constexpr const char* kHeadBias = "head.bias";

    explicit ToyBackend(const ToyConfig& config);
    ToyBackend(const ToyConfig& config, ParameterMap params);

    const ToyConfig& config() const noexcept { return config_; }

    BackendDescriptor descriptor() const override;
    const DiffusionSchedule& schedule() const override { return schedule_; }
    std::unique_ptr<Backend> clone() const override { return std::make_unique<ToyBackend>(*this); }

    LatentImage encode_image(const Tensor& image) const override;
    Tensor decode_latent(const LatentImage& latent) const override;
    TextEmbedding encode_prompt(std::string_view prompt, std::span<const ConceptToken> tokens) const override;
    Tensor word_embedding(std::string_view word) const override;

    Prediction predict_noise(const LatentImage& x_t, const TextEmbedding& c, int t) const override;
    Gradients backward(const Prediction& pred, const Tensor* grad_eps,
                       const std::vector<Tensor>* grad_maps) const override;

    const ParameterMap& parameters() const override { return params_; }
    ParameterMap& mutable_parameters() override { return params_; }
    std::vector<std::string> trainable_params(TrainableSelector selector) const override;

    /// Raises the attention logit of a token with `token_embedding` by `strength`
    /// on every position of `region` (latent grid), in every head, leaving the
    /// logits of `others` unchanged. Used to build test cases with controllable
    /// attention.
    void plant_attention(const BinaryMask& region, const Tensor& token_embedding, double strength,
                         std::span<const Tensor> others = {});

    void replace_schedule(DiffusionSchedule schedule);

private:
    void check_latent(const Tensor& x) const;

    ToyConfig config_;
    DiffusionSchedule schedule_;
    ParameterMap params_;
};

ToyBackend make_toy_backend(std::uint64_t seed, std::size_t channels, std::size_t height, std::size_t width,
                            std::size_t embed_dim, std::size_t num_heads);

/// Flat little-endian float64 array + JSON shape manifest.
void save_toy_params(const ToyBackend& backend, const std::filesystem::path& bin_path,
                     const std::filesystem::path& json_path);
ToyBackend load_toy_params(const std::filesystem::path& bin_path, const std::filesystem::path& json_path);

}  // namespace incontext
