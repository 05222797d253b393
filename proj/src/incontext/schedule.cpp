// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/schedule.hpp"

#include "incontext/error.hpp"

#include <cmath>

namespace incontext {
namespace {
constexpr const char* kModule = "backend";
}

DiffusionSchedule::DiffusionSchedule(std::vector<double> alphas_bar) : alphas_bar_(std::move(alphas_bar)) {
    if (alphas_bar_.size() < 2) throw InvalidArgument(kModule, "schedule needs at least one timestep");
    if (alphas_bar_[0] != 1.0) throw InvalidArgument(kModule, "alphas_bar[0] must be exactly 1");
    for (std::size_t t = 1; t < alphas_bar_.size(); ++t) {
        const double a = alphas_bar_[t];
        if (!(a > 0.0 && a <= 1.0)) throw InvalidArgument(kModule, "alphas_bar entries must lie in (0,1]");
        if (a > alphas_bar_[t - 1]) throw InvalidArgument(kModule, "alphas_bar must be nonincreasing");
    }
}

DiffusionSchedule DiffusionSchedule::stable_diffusion(int steps) {
    constexpr int kTrainSteps = 1000;
    if (steps < 1 || steps > kTrainSteps) throw RangeError(kModule, "sampler steps must be in [1,1000]");
    const double b0 = std::sqrt(0.00085), b1 = std::sqrt(0.012);
    std::vector<double> cumulative(kTrainSteps);
    double prod = 1.0;
    for (int i = 0; i < kTrainSteps; ++i) {
        const double s = b0 + (b1 - b0) * i / (kTrainSteps - 1);
        prod *= 1.0 - s * s;
        cumulative[i] = prod;
    }
    const int stride = kTrainSteps / steps;
    std::vector<double> ab(steps + 1);
    ab[0] = 1.0;
    for (int t = 1; t <= steps; ++t) ab[t] = cumulative[(t - 1) * stride + 1];
    return DiffusionSchedule(std::move(ab));
}

DiffusionSchedule DiffusionSchedule::linear(int steps, double min_alpha_bar) {
    if (steps < 1) throw RangeError(kModule, "steps must be >= 1");
    std::vector<double> ab(steps + 1);
    for (int t = 0; t <= steps; ++t) ab[t] = 1.0 - (1.0 - min_alpha_bar) * t / steps;
    return DiffusionSchedule(std::move(ab));
}

double DiffusionSchedule::alpha_bar(int t) const {
    if (t < 0 || t > T()) throw RangeError(kModule, "timestep " + std::to_string(t) + " outside [0," + std::to_string(T()) + "]");
    return alphas_bar_[static_cast<std::size_t>(t)];
}

LatentImage add_noise(const LatentImage& x0, const Tensor& eps, int t, const DiffusionSchedule& sched) {
    const double ab = sched.alpha_bar(t);
    require_same_shape(x0.data, eps, kModule, "add_noise");
    if (t == 0) return x0;
    const double s = std::sqrt(ab), sigma = std::sqrt(1.0 - ab);
    LatentImage out{Tensor(x0.data.shape()), x0.scale_factor};
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = s * x0.data[i] + sigma * eps[i];
    return out;
}

LatentImage denoise_step(const LatentImage& x_t, const Tensor& eps_pred, int t, const DiffusionSchedule& sched) {
    if (t < 1 || t > sched.T()) throw RangeError(kModule, "denoise_step timestep " + std::to_string(t) + " outside [1,T]");
    require_same_shape(x_t.data, eps_pred, kModule, "denoise_step");
    const double ab = sched.alpha_bar(t), ab_prev = sched.alpha_bar(t - 1);
    const double s = std::sqrt(ab), sigma = std::sqrt(1.0 - ab);
    const double s_prev = std::sqrt(ab_prev), sigma_prev = std::sqrt(1.0 - ab_prev);
    LatentImage out{Tensor(x_t.data.shape()), x_t.scale_factor};
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double x0 = (x_t.data[i] - sigma * eps_pred[i]) / s;
        out.data[i] = s_prev * x0 + sigma_prev * eps_pred[i];
    }
    return out;
}

}  // namespace incontext
