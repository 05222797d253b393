// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "incontext/backend.hpp"

#include <utility>
#include <vector>

namespace incontext {

/// Grid every upsampling-block map is resized to before cross-layer reduction:
/// the smallest recorded resolution (by area).
std::pair<std::size_t, std::size_t> common_attention_resolution(const CrossAttentionRecord& record);

/// Head-averaged map of the token at `position` for each upsampling-block layer,
/// bilinearly resized to the common resolution.
std::vector<Tensor> per_layer_token_maps(const CrossAttentionRecord& record, std::size_t position);

/// Mean of per_layer_token_maps.
Tensor aggregate_token_map(const CrossAttentionRecord& record, std::size_t position);

/// Chain rule for per_layer_token_maps: grads has one [h,w] entry per
/// upsampling-block layer; result matches record.maps shapes (zeros elsewhere).
std::vector<Tensor> per_layer_token_maps_backward(const CrossAttentionRecord& record, std::size_t position,
                                                  const std::vector<Tensor>& grads);

std::vector<Tensor> aggregate_token_map_backward(const CrossAttentionRecord& record, std::size_t position,
                                                 const Tensor& grad);

/// Largest deviation from 1 of the per-position sums over text tokens.
double softmax_sum_error(const CrossAttentionRecord& record);

}  // namespace incontext
