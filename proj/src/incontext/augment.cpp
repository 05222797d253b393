// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/augment.hpp"

#include "incontext/error.hpp"

#include <algorithm>
#include <cmath>

namespace incontext {
namespace {

constexpr const char* kModule = "concept_learning";
constexpr double kPadGray = 0.5;

void check_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw RangeError(kModule, std::string(name) + " must lie in [0,1]");
}

/// Source coordinate of output index `i` when zooming about the centre.
double zoom_source(std::size_t i, std::size_t n, double scale) {
    const double c = 0.5 * static_cast<double>(n);
    return (static_cast<double>(i) + 0.5 - c) / scale + c - 0.5;
}

}  // namespace

void SourceSample::validate() const {
    if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError(kModule, "source image must be [3,H,W]");
    if (mask.height() != image.dim(1) || mask.width() != image.dim(2))
        throw ShapeError(kModule, "source mask " + shape_string(mask.data().shape()) + " does not match image " +
                                      shape_string(image.shape()));
    if (object_class.empty()) throw InvalidArgument(kModule, "object class must be nonempty");
}

AugmentationConfig AugmentationConfig::disabled() {
    AugmentationConfig c;
    c.p_hflip = c.p_grayscale = c.p_zoom = c.p_jitter = 0.0;
    return c;
}

void AugmentationConfig::validate() const {
    check_probability(p_hflip, "p_hflip");
    check_probability(p_grayscale, "p_grayscale");
    check_probability(p_zoom, "p_zoom");
    check_probability(p_jitter, "p_jitter");
    if (!(zoom_min > 0.0 && zoom_max >= zoom_min)) throw RangeError(kModule, "zoom range must be positive and ordered");
    for (double s : {jitter_brightness, jitter_contrast, jitter_saturation})
        if (!(s >= 0.0 && s < 1.0)) throw RangeError(kModule, "jitter strengths must lie in [0,1)");
}

SourceSample hflip(const SourceSample& s) {
    SourceSample out = s;
    const std::size_t C = s.image.dim(0), H = s.image.dim(1), W = s.image.dim(2);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j) out.image.at(c, i, j) = s.image.at(c, i, W - 1 - j);
    Tensor m(s.mask.data().shape());
    for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) m.at(i, j) = s.mask.data().at(i, W - 1 - j);
    out.mask = BinaryMask(std::move(m), s.mask.resolution());
    return out;
}

Tensor grayscale(const Tensor& image) {
    Tensor out = image;
    const std::size_t n = image.dim(1) * image.dim(2);
    for (std::size_t k = 0; k < n; ++k) {
        const double y = 0.299 * image[k] + 0.587 * image[n + k] + 0.114 * image[2 * n + k];
        out[k] = out[n + k] = out[2 * n + k] = y;
    }
    return out;
}

SourceSample zoom(const SourceSample& s, double scale) {
    if (!(scale > 0.0)) throw RangeError(kModule, "zoom scale must be positive");
    if (scale == 1.0) return s;
    const std::size_t C = s.image.dim(0), H = s.image.dim(1), W = s.image.dim(2);
    SourceSample out = s;
    Tensor m({H, W});
    for (std::size_t i = 0; i < H; ++i) {
        const double y = zoom_source(i, H, scale);
        for (std::size_t j = 0; j < W; ++j) {
            const double x = zoom_source(j, W, scale);
            const bool inside = y > -0.5 && y < static_cast<double>(H) - 0.5 && x > -0.5 &&
                                x < static_cast<double>(W) - 0.5;
            if (!inside) {
                for (std::size_t c = 0; c < C; ++c) out.image.at(c, i, j) = kPadGray;
                continue;
            }
            const auto ni = static_cast<std::size_t>(std::lround(std::clamp(y, 0.0, static_cast<double>(H - 1))));
            const auto nj = static_cast<std::size_t>(std::lround(std::clamp(x, 0.0, static_cast<double>(W - 1))));
            m.at(i, j) = s.mask.data().at(ni, nj);

            const double yc = std::clamp(y, 0.0, static_cast<double>(H - 1));
            const double xc = std::clamp(x, 0.0, static_cast<double>(W - 1));
            const auto y0 = static_cast<std::size_t>(std::floor(yc));
            const auto x0 = static_cast<std::size_t>(std::floor(xc));
            const std::size_t y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
            const double fy = yc - static_cast<double>(y0), fx = xc - static_cast<double>(x0);
            for (std::size_t c = 0; c < C; ++c) {
                const double top = s.image.at(c, y0, x0) + fx * (s.image.at(c, y0, x1) - s.image.at(c, y0, x0));
                const double bot = s.image.at(c, y1, x0) + fx * (s.image.at(c, y1, x1) - s.image.at(c, y1, x0));
                out.image.at(c, i, j) = top + fy * (bot - top);
            }
        }
    }
    out.mask = BinaryMask(std::move(m), s.mask.resolution());
    return out;
}

Tensor color_jitter(const Tensor& image, double brightness, double contrast, double saturation) {
    Tensor out = image * brightness;
    const double mean = out.mean();
    for (double& v : out.values()) v = mean + contrast * (v - mean);
    const Tensor gray = grayscale(out);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = gray[k] + saturation * (out[k] - gray[k]);
    for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

AugmentPlan draw_plan(const AugmentationConfig& cfg, Rng& rng) {
    cfg.validate();
    AugmentPlan plan;
    plan.flip = bernoulli(rng, cfg.p_hflip);
    plan.gray = bernoulli(rng, cfg.p_grayscale);
    const bool do_zoom = bernoulli(rng, cfg.p_zoom);
    const double zoom_u = uniform01(rng);
    const bool do_jitter = bernoulli(rng, cfg.p_jitter);
    const double jb = uniform01(rng), jc = uniform01(rng), js = uniform01(rng);
    if (do_zoom) plan.zoom_scale = cfg.zoom_min + (cfg.zoom_max - cfg.zoom_min) * zoom_u;
    if (do_jitter) {
        auto factor = [](double strength, double u) { return 1.0 - strength + 2.0 * strength * u; };
        plan.jitter = std::array<double, 3>{factor(cfg.jitter_brightness, jb), factor(cfg.jitter_contrast, jc),
                                            factor(cfg.jitter_saturation, js)};
    }
    return plan;
}

AugmentedSample apply_plan(const SourceSample& s, const AugmentPlan& plan) {
    AugmentedSample out{s, ZoomTag::None};
    if (plan.flip) out.sample = hflip(out.sample);
    if (plan.zoom_scale) {
        out.sample = zoom(out.sample, *plan.zoom_scale);
        if (*plan.zoom_scale < 1.0) out.zoom = ZoomTag::Out;
        if (*plan.zoom_scale > 1.0) out.zoom = ZoomTag::In;
    }
    if (plan.gray) out.sample.image = grayscale(out.sample.image);
    if (plan.jitter) out.sample.image = color_jitter(out.sample.image, (*plan.jitter)[0], (*plan.jitter)[1], (*plan.jitter)[2]);
    return out;
}

AugmentedSample augment(const SourceSample& s, const AugmentationConfig& cfg, Rng& rng) {
    return apply_plan(s, draw_plan(cfg, rng));
}

}  // namespace incontext
