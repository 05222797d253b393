// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "incontext/backend.hpp"
#include "incontext/masking.hpp"

#include <vector>

namespace incontext {

/// Mean squared error between the aggregated attention map of the token at
/// `position` and the mask bilinearly resized to the attention grid. When
/// `grad_maps` is given it receives d(loss)/d(record.maps).
double attention_loss(const CrossAttentionRecord& record, std::size_t position, const BinaryMask& mask,
                      std::vector<Tensor>* grad_maps = nullptr);

/// mean((soft * (eps_pred - eps_true))^2), soft broadcast over channels.
double context_loss(const Tensor& eps_pred, const Tensor& eps_true, const SoftMask& soft, Tensor* grad_eps = nullptr);

/// Plain diffusion MSE, mean reduction.
double diffusion_mse(const Tensor& eps_pred, const Tensor& eps_true, Tensor* grad_eps = nullptr);

/// Denoiser run on the masked latent with the concept prompt, compared with
/// eps_true over the full canvas. `grads`, when given, receives the backward
/// pass of the loss.
double roi_loss(const Backend& backend, const LatentImage& x_t, const BinaryMask& mask_latent,
                const TextEmbedding& c_star, int t, const Tensor& eps_true, Gradients* grads = nullptr);

double total_loss(double l_con, double l_att, double l_roi, double lambda_att, double lambda_roi);

}  // namespace incontext
