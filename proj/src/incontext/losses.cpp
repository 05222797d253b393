// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/losses.hpp"

#include "incontext/attention.hpp"
#include "incontext/error.hpp"

#include <cmath>

namespace incontext {
namespace {

constexpr const char* kModule = "concept_learning";

}  // namespace

double attention_loss(const CrossAttentionRecord& record, std::size_t position, const BinaryMask& mask,
                      std::vector<Tensor>* grad_maps) {
    const Tensor map = aggregate_token_map(record, position);
    const Tensor target = resize_bilinear(mask, map.dim(0), map.dim(1));
    const double n = static_cast<double>(map.size());
    double loss = 0.0;
    Tensor grad(map.shape());
    for (std::size_t k = 0; k < map.size(); ++k) {
        const double r = map[k] - target[k];
        loss += r * r;
        grad[k] = 2.0 * r / n;
    }
    if (grad_maps) *grad_maps = aggregate_token_map_backward(record, position, grad);
    return loss / n;
}

double context_loss(const Tensor& eps_pred, const Tensor& eps_true, const SoftMask& soft, Tensor* grad_eps) {
    require_same_shape(eps_pred, eps_true, kModule, "context_loss");
    if (eps_pred.rank() != 3 || soft.data.rank() != 2 || soft.data.dim(0) != eps_pred.dim(1) ||
        soft.data.dim(1) != eps_pred.dim(2))
        throw ShapeError(kModule, "soft mask " + shape_string(soft.data.shape()) + " does not match noise " +
                                      shape_string(eps_pred.shape()));
    const std::size_t plane = soft.data.size();
    const double n = static_cast<double>(eps_pred.size());
    double loss = 0.0;
    if (grad_eps) *grad_eps = Tensor(eps_pred.shape());
    for (std::size_t k = 0; k < eps_pred.size(); ++k) {
        const double m = soft.data[k % plane];
        const double r = eps_pred[k] - eps_true[k];
        loss += (m * r) * (m * r);
        if (grad_eps) (*grad_eps)[k] = 2.0 * m * m * r / n;
    }
    return loss / n;
}

double diffusion_mse(const Tensor& eps_pred, const Tensor& eps_true, Tensor* grad_eps) {
    require_same_shape(eps_pred, eps_true, kModule, "diffusion_mse");
    const double n = static_cast<double>(eps_pred.size());
    double loss = 0.0;
    if (grad_eps) *grad_eps = Tensor(eps_pred.shape());
    for (std::size_t k = 0; k < eps_pred.size(); ++k) {
        const double r = eps_pred[k] - eps_true[k];
        loss += r * r;
        if (grad_eps) (*grad_eps)[k] = 2.0 * r / n;
    }
    return loss / n;
}

double roi_loss(const Backend& backend, const LatentImage& x_t, const BinaryMask& mask_latent,
                const TextEmbedding& c_star, int t, const Tensor& eps_true, Gradients* grads) {
    const LatentImage masked{apply_mask(mask_latent, x_t.data), x_t.scale_factor};
    const Prediction pred = backend.predict_noise(masked, c_star, t);
    Tensor g;
    const double loss = diffusion_mse(pred.eps, eps_true, grads ? &g : nullptr);
    if (grads) {
        *grads = backend.backward(pred, &g, nullptr);
        // Chain through the mask multiplication.
        grads->latent = apply_mask(mask_latent, grads->latent);
    }
    return loss;
}

double total_loss(double l_con, double l_att, double l_roi, double lambda_att, double lambda_roi) {
    if (!std::isfinite(l_con) || !std::isfinite(l_att) || !std::isfinite(l_roi))
        throw NumericError(kModule, "non-finite loss component");
    return l_con + lambda_att * l_att + lambda_roi * l_roi;
}

}  // namespace incontext
