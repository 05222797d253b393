// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/masking.hpp"

#include "incontext/error.hpp"
#include "incontext/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace incontext {
namespace {

constexpr const char* kModule = "masking";

struct Tap {
    std::size_t i0, i1;
    double w0, w1;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
    std::vector<Tap> taps(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
        if (src < 0.0) src = 0.0;
        auto i0 = static_cast<std::size_t>(std::floor(src));
        if (i0 > in - 1) i0 = in - 1;
        const std::size_t i1 = std::min(i0 + 1, in - 1);
        const double frac = src - static_cast<double>(i0);
        taps[o] = {i0, i1, 1.0 - frac, frac};
    }
    return taps;
}

std::size_t nearest_src(std::size_t o, std::size_t in, std::size_t out) {
    // floor((o + 0.5) * in / out) in exact integer arithmetic
    return std::min((2 * o + 1) * in / (2 * out), in - 1);
}

void resize_plane(const double* src, std::size_t ih, std::size_t iw, double* dst, std::size_t oh, std::size_t ow,
                  ResizeMode mode) {
    if (mode == ResizeMode::Nearest) {
        for (std::size_t i = 0; i < oh; ++i) {
            const std::size_t si = nearest_src(i, ih, oh);
            for (std::size_t j = 0; j < ow; ++j) dst[i * ow + j] = src[si * iw + nearest_src(j, iw, ow)];
        }
        return;
    }
    const auto ty = bilinear_taps(ih, oh);
    const auto tx = bilinear_taps(iw, ow);
    for (std::size_t i = 0; i < oh; ++i) {
        const Tap& y = ty[i];
        for (std::size_t j = 0; j < ow; ++j) {
            const Tap& x = tx[j];
            // lerp form keeps constant regions exactly constant
            const double a = src[y.i0 * iw + x.i0], b = src[y.i0 * iw + x.i1];
            const double c = src[y.i1 * iw + x.i0], d = src[y.i1 * iw + x.i1];
            const double top = a + x.w1 * (b - a);
            const double bottom = c + x.w1 * (d - c);
            dst[i * ow + j] = top + y.w1 * (bottom - top);
        }
    }
}

}  // namespace

std::string_view to_string(Resolution r) {
    switch (r) {
        case Resolution::Image: return "image";
        case Resolution::Latent: return "latent";
        case Resolution::Attention: return "attention";
    }
    return "unknown";
}

BinaryMask::BinaryMask(Tensor data, Resolution tag) : data_(std::move(data)), tag_(tag) {
    if (data_.rank() != 2 || data_.dim(0) == 0 || data_.dim(1) == 0)
        throw ShapeError(kModule, "binary mask must be a non-empty [H,W] tensor, got " + shape_string(data_.shape()));
    for (double v : data_.values())
        if (v != 0.0 && v != 1.0) throw InvalidArgument(kModule, "binary mask entries must be exactly 0 or 1");
}

BinaryMask BinaryMask::ones(std::size_t h, std::size_t w, Resolution tag) { return {Tensor::ones({h, w}), tag}; }

BinaryMask BinaryMask::zeros(std::size_t h, std::size_t w, Resolution tag) { return {Tensor::zeros({h, w}), tag}; }

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(data_.values().begin(), data_.values().end(), 1.0));
}

BinaryMask load_mask(const std::filesystem::path& path, Resolution tag) {
    const Raster8 r = read_raster(path);
    Tensor data({r.height, r.width});
    const std::size_t n = r.width * r.height;
    // PNG decodes as RGBA; the alpha channel is not part of the mask value.
    const std::size_t value_channels = r.channels == 4 ? 3 : (r.channels == 2 ? 1 : r.channels);
    for (std::size_t p = 0; p < n; ++p) {
        const std::uint8_t v = r.pixels[p * r.channels];
        for (std::size_t c = 1; c < value_channels; ++c)
            if (r.pixels[p * r.channels + c] != v)
                throw FormatError(kModule, "mask '" + path.string() + "' has unequal channels; expected single-channel data");
        data[p] = v >= 128 ? 1.0 : 0.0;
    }
    return {std::move(data), tag};
}

void save_mask(const std::filesystem::path& path, const BinaryMask& mask) {
    Raster8 r;
    r.height = mask.height();
    r.width = mask.width();
    r.channels = 1;
    r.pixels.resize(r.width * r.height);
    for (std::size_t p = 0; p < r.pixels.size(); ++p) r.pixels[p] = mask.data()[p] != 0.0 ? 255 : 0;
    write_raster(path, r);
}

SoftMask soften(const BinaryMask& mask, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw RangeError(kModule, "alpha must lie in [0,1], got " + std::to_string(alpha));
    SoftMask out{Tensor(mask.data().shape()), alpha};
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = alpha + (1.0 - alpha) * mask.data()[i];
    return out;
}

Tensor resize_map(const Tensor& map, std::size_t out_h, std::size_t out_w, ResizeMode mode) {
    if (out_h == 0 || out_w == 0) throw ShapeError(kModule, "resize target must be at least 1x1");
    if (map.rank() == 2) {
        Tensor out({out_h, out_w});
        resize_plane(map.data(), map.dim(0), map.dim(1), out.data(), out_h, out_w, mode);
        return out;
    }
    if (map.rank() == 3) {
        const std::size_t c = map.dim(0), ih = map.dim(1), iw = map.dim(2);
        Tensor out({c, out_h, out_w});
        for (std::size_t k = 0; k < c; ++k)
            resize_plane(map.data() + k * ih * iw, ih, iw, out.data() + k * out_h * out_w, out_h, out_w, mode);
        return out;
    }
    throw ShapeError(kModule, "resize expects [H,W] or [C,H,W], got " + shape_string(map.shape()));
}

Tensor resize_map_adjoint(const Tensor& grad_out, std::size_t in_h, std::size_t in_w) {
    if (grad_out.rank() != 2) throw ShapeError(kModule, "resize adjoint expects an [H,W] gradient");
    const std::size_t oh = grad_out.dim(0), ow = grad_out.dim(1);
    Tensor grad_in({in_h, in_w});
    const auto ty = bilinear_taps(in_h, oh);
    const auto tx = bilinear_taps(in_w, ow);
    for (std::size_t i = 0; i < oh; ++i) {
        const Tap& y = ty[i];
        for (std::size_t j = 0; j < ow; ++j) {
            const Tap& x = tx[j];
            const double g = grad_out.at(i, j);
            grad_in.at(y.i0, x.i0) += y.w0 * x.w0 * g;
            grad_in.at(y.i0, x.i1) += y.w0 * x.w1 * g;
            grad_in.at(y.i1, x.i0) += y.w1 * x.w0 * g;
            grad_in.at(y.i1, x.i1) += y.w1 * x.w1 * g;
        }
    }
    return grad_in;
}

BinaryMask resize_nearest(const BinaryMask& mask, std::size_t out_h, std::size_t out_w, Resolution tag) {
    return {resize_map(mask.data(), out_h, out_w, ResizeMode::Nearest), tag};
}

Tensor resize_bilinear(const BinaryMask& mask, std::size_t out_h, std::size_t out_w) {
    Tensor out = resize_map(mask.data(), out_h, out_w, ResizeMode::Bilinear);
    // keep the [0,1] contract exact under rounding
    for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

Tensor apply_mask(const Tensor& mask, const Tensor& x) {
    if (mask.rank() != 2) throw ShapeError(kModule, "mask must be [H,W]");
    const std::size_t h = mask.dim(0), w = mask.dim(1);
    if (x.rank() == 2) {
        require_same_shape(mask, x, kModule, "apply_mask");
        Tensor out(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = mask[i] * x[i];
        return out;
    }
    if (x.rank() != 3 || x.dim(1) != h || x.dim(2) != w)
        throw ShapeError(kModule, "apply_mask: mask " + shape_string(mask.shape()) + " does not match " +
                                      shape_string(x.shape()) + " (resize first)");
    Tensor out(x.shape());
    const std::size_t plane = h * w;
    for (std::size_t c = 0; c < x.dim(0); ++c)
        for (std::size_t p = 0; p < plane; ++p) out[c * plane + p] = mask[p] * x[c * plane + p];
    return out;
}

Tensor apply_mask(const BinaryMask& mask, const Tensor& x) { return apply_mask(mask.data(), x); }

Tensor min_max_normalize(const Tensor& map) {
    const double lo = map.min(), hi = map.max();
    Tensor out(map.shape());
    if (!(hi > lo)) return out;
    const double range = hi - lo;
    for (std::size_t i = 0; i < map.size(); ++i) out[i] = (map[i] - lo) / range;
    return out;
}

BinaryMask binarize_map(const Tensor& map, double threshold, Resolution tag) {
    if (map.rank() != 2) throw ShapeError(kModule, "binarize_map expects an [H,W] map");
    for (double v : map.values())
        if (!(v >= 0.0)) throw InvalidArgument(kModule, "binarize_map expects a nonnegative finite map");
    const Tensor norm = min_max_normalize(map);
    Tensor out(map.shape());
    for (std::size_t i = 0; i < norm.size(); ++i) out[i] = (norm[i] >= threshold && norm[i] > 0.0) ? 1.0 : 0.0;
    return {std::move(out), tag};
}

BinaryMask largest_component(const BinaryMask& mask) {
    const std::size_t h = mask.height(), w = mask.width();
    std::vector<int> label(h * w, -1);
    std::vector<std::size_t> sizes;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < h * w; ++start) {
        if (mask.data()[start] == 0.0 || label[start] >= 0) continue;
        const int id = static_cast<int>(sizes.size());
        std::size_t n = 0;
        stack.push_back(start);
        label[start] = id;
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            ++n;
            const std::size_t i = p / w, j = p % w;
            const auto visit = [&](std::size_t q) {
                if (mask.data()[q] != 0.0 && label[q] < 0) {
                    label[q] = id;
                    stack.push_back(q);
                }
            };
            if (i > 0) visit(p - w);
            if (i + 1 < h) visit(p + w);
            if (j > 0) visit(p - 1);
            if (j + 1 < w) visit(p + 1);
        }
        sizes.push_back(n);
    }
    if (sizes.empty()) return mask;
    const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    Tensor out({h, w});
    for (std::size_t p = 0; p < h * w; ++p) out[p] = label[p] == best ? 1.0 : 0.0;
    return {std::move(out), mask.resolution()};
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape(a.data(), b.data(), kModule, "iou");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const bool x = a.data()[i] != 0.0, y = b.data()[i] != 0.0;
        inter += (x && y);
        uni += (x || y);
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace incontext
