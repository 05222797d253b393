// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/attention.hpp"

#include "incontext/error.hpp"
#include "incontext/masking.hpp"

#include <cmath>

namespace incontext {
namespace {

constexpr const char* kModule = "attention";

void check_map(const Tensor& m) {
    if (m.rank() != 4) throw ShapeError(kModule, "attention map must be [heads,tokens,h,w], got " + shape_string(m.shape()));
}

Tensor head_mean(const Tensor& map, std::size_t position) {
    const std::size_t heads = map.dim(0), tokens = map.dim(1), h = map.dim(2), w = map.dim(3);
    if (position >= tokens) throw ShapeError(kModule, "token position out of range");
    Tensor out({h, w});
    const std::size_t plane = h * w;
    for (std::size_t k = 0; k < heads; ++k) {
        const double* src = map.data() + (k * tokens + position) * plane;
        for (std::size_t p = 0; p < plane; ++p) out[p] += src[p];
    }
    out *= 1.0 / static_cast<double>(heads);
    return out;
}

}  // namespace

std::pair<std::size_t, std::size_t> common_attention_resolution(const CrossAttentionRecord& record) {
    std::pair<std::size_t, std::size_t> best{0, 0};
    bool found = false;
    for (std::size_t l = 0; l < record.maps.size(); ++l) {
        if (record.layer_tags.at(l) != LayerTag::Up) continue;
        check_map(record.maps[l]);
        const std::size_t h = record.maps[l].dim(2), w = record.maps[l].dim(3);
        if (!found || h * w < best.first * best.second) best = {h, w};
        found = true;
    }
    if (!found) throw InvalidArgument(kModule, "attention record has no upsampling-block layers");
    return best;
}

std::vector<Tensor> per_layer_token_maps(const CrossAttentionRecord& record, std::size_t position) {
    const auto [h, w] = common_attention_resolution(record);
    std::vector<Tensor> out;
    for (std::size_t l = 0; l < record.maps.size(); ++l) {
        if (record.layer_tags[l] != LayerTag::Up) continue;
        Tensor m = head_mean(record.maps[l], position);
        if (m.dim(0) != h || m.dim(1) != w) m = resize_map(m, h, w, ResizeMode::Bilinear);
        out.push_back(std::move(m));
    }
    return out;
}

Tensor aggregate_token_map(const CrossAttentionRecord& record, std::size_t position) {
    auto maps = per_layer_token_maps(record, position);
    Tensor out = maps.front();
    for (std::size_t i = 1; i < maps.size(); ++i) out += maps[i];
    if (maps.size() > 1) out *= 1.0 / static_cast<double>(maps.size());
    return out;
}

std::vector<Tensor> per_layer_token_maps_backward(const CrossAttentionRecord& record, std::size_t position,
                                                  const std::vector<Tensor>& grads) {
    const auto [h, w] = common_attention_resolution(record);
    std::vector<Tensor> out;
    std::size_t g = 0;
    for (std::size_t l = 0; l < record.maps.size(); ++l) {
        const Tensor& map = record.maps[l];
        Tensor grad_map(map.shape());
        if (record.layer_tags[l] == LayerTag::Up) {
            if (g >= grads.size()) throw ShapeError(kModule, "missing per-layer gradient");
            const std::size_t heads = map.dim(0), tokens = map.dim(1), mh = map.dim(2), mw = map.dim(3);
            Tensor local = grads[g++];
            if (mh != h || mw != w) local = resize_map_adjoint(local, mh, mw);
            const std::size_t plane = mh * mw;
            const double inv = 1.0 / static_cast<double>(heads);
            for (std::size_t k = 0; k < heads; ++k) {
                double* dst = grad_map.data() + (k * tokens + position) * plane;
                for (std::size_t p = 0; p < plane; ++p) dst[p] = local[p] * inv;
            }
        }
        out.push_back(std::move(grad_map));
    }
    return out;
}

std::vector<Tensor> aggregate_token_map_backward(const CrossAttentionRecord& record, std::size_t position,
                                                 const Tensor& grad) {
    std::size_t up = 0;
    for (LayerTag t : record.layer_tags) up += (t == LayerTag::Up);
    if (up == 0) throw InvalidArgument(kModule, "attention record has no upsampling-block layers");
    std::vector<Tensor> grads(up, up > 1 ? grad * (1.0 / static_cast<double>(up)) : grad);
    return per_layer_token_maps_backward(record, position, grads);
}

double softmax_sum_error(const CrossAttentionRecord& record) {
    double worst = 0.0;
    for (const Tensor& m : record.maps) {
        check_map(m);
        const std::size_t heads = m.dim(0), tokens = m.dim(1), plane = m.dim(2) * m.dim(3);
        for (std::size_t k = 0; k < heads; ++k)
            for (std::size_t p = 0; p < plane; ++p) {
                double s = 0.0;
                for (std::size_t l = 0; l < tokens; ++l) s += m[(k * tokens + l) * plane + p];
                worst = std::max(worst, std::abs(s - 1.0));
            }
    }
    return worst;
}

}  // namespace incontext
