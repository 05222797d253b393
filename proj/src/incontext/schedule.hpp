// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "incontext/tensor.hpp"

#include <cstdint>
#include <vector>

namespace incontext {

struct LatentImage {
    Tensor data;  // [C,h,w]
    int scale_factor = 1;

    std::size_t channels() const { return data.dim(0); }
    std::size_t height() const { return data.dim(1); }
    std::size_t width() const { return data.dim(2); }
};

struct NoiseSample {
    Tensor data;
    std::uint64_t seed = 0;
};

enum class Sampler { DeterministicDdim };

/// Cumulative signal levels for t = 0..T, alphas_bar[0] == 1.
class DiffusionSchedule {
public:
    /// Validates: size >= 2, alphas_bar[0] == 1, all in (0,1], nonincreasing.
    explicit DiffusionSchedule(std::vector<double> alphas_bar);

    /// Scaled-linear betas (0.00085 .. 0.012 over 1000 training steps) subsampled
    /// to `steps` sampler steps with "leading" spacing and offset 1.
    static DiffusionSchedule stable_diffusion(int steps = 50);
    /// alphas_bar[t] = 1 - (1 - min_alpha_bar) * t / T, handy for tests.
    static DiffusionSchedule linear(int steps, double min_alpha_bar);

    int T() const noexcept { return static_cast<int>(alphas_bar_.size()) - 1; }
    double alpha_bar(int t) const;
    const std::vector<double>& alphas_bar() const noexcept { return alphas_bar_; }
    Sampler sampler() const noexcept { return Sampler::DeterministicDdim; }

    friend bool operator==(const DiffusionSchedule&, const DiffusionSchedule&) = default;

private:
    std::vector<double> alphas_bar_;
};

/// sqrt(ab_t) * x0 + sqrt(1 - ab_t) * eps; t == 0 returns x0 untouched.
LatentImage add_noise(const LatentImage& x0, const Tensor& eps, int t, const DiffusionSchedule& sched);
/// Deterministic DDIM update from t to t-1.
LatentImage denoise_step(const LatentImage& x_t, const Tensor& eps_pred, int t, const DiffusionSchedule& sched);

}  // namespace incontext
