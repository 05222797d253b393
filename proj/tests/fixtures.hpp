// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

// Toy scenes shared by the unit tests and the acceptance runner.

#pragma once

#include "incontext/augment.hpp"
#include "incontext/random.hpp"
#include "incontext/toy_backend.hpp"

#include <string>
#include <vector>

namespace fixtures {

using namespace incontext;

/// Smooth colour patch on a flat background; the patch is the concept region.
inline SourceSample synthetic_sample(std::size_t h = 16, std::size_t w = 16, std::size_t border = 1) {
    Tensor img({3, h, w}, 0.3);
    Tensor m({h, w});
    for (std::size_t i = border; i < h - border; ++i)
        for (std::size_t j = border; j < w - border; ++j) {
            m.at(i, j) = 1.0;
            img.at(0, i, j) = 0.2 + 0.6 * static_cast<double>(j) / static_cast<double>(w);
            img.at(1, i, j) = 0.7;
            img.at(2, i, j) = 0.5 + 0.3 * static_cast<double>(i) / static_cast<double>(h);
        }
    return SourceSample{img, BinaryMask(m, Resolution::Image), "chair"};
}

inline std::vector<Tensor> word_embeddings(const Backend& b, std::initializer_list<const char*> words) {
    std::vector<Tensor> out;
    for (const char* w : words) out.push_back(b.word_embedding(w));
    return out;
}

/// A random 7x7 square region with a tinted image, on a 16x16 toy backend.
struct PlantedScene {
    ToyBackend backend;
    Tensor image;
    BinaryMask region;
};

inline PlantedScene planted_scene(std::uint64_t seed) {
    const std::size_t H = 16, W = 16;
    PlantedScene s{make_toy_backend(seed, 3, H, W, 32, 2), Tensor({3, H, W}), BinaryMask::zeros(H, W, Resolution::Image)};
    Rng rng(seed);
    const auto r0 = static_cast<std::size_t>(uniform_int(rng, 0, 8));
    const auto c0 = static_cast<std::size_t>(uniform_int(rng, 0, 8));
    Tensor m({H, W});
    for (std::size_t i = r0; i < r0 + 7; ++i)
        for (std::size_t j = c0; j < c0 + 7; ++j) m.at(i, j) = 1.0;
    for (double& x : s.image.values()) x = 0.3 + 0.1 * uniform01(rng);
    for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j)
            if (m.at(i, j) != 0.0) s.image.at(0, i, j) = 0.9;
    s.region = BinaryMask(m, Resolution::Image);
    return s;
}

/// Planted scene plus a concept token whose attention is raised on the region
/// relative to the other words of `prompt`.
struct EditScene {
    PlantedScene scene;
    ConceptToken token;
    std::string prompt;
};

inline EditScene edit_scene(std::uint64_t seed, double strength = 2.0) {
    EditScene e{planted_scene(seed), {}, "a photo of an chair, with [v*] style"};
    ToyBackend& b = e.scene.backend;
    e.token = ConceptToken{"v*", b.word_embedding("pattern"), "pattern"};
    const std::vector<Tensor> others = word_embeddings(b, {"a", "photo", "of", "an", "chair", ",", "with", "style"});
    b.plant_attention(BinaryMask(e.scene.region.data(), Resolution::Latent), e.token.embedding, strength, others);
    return e;
}

inline BinaryMask on_latent(const BinaryMask& m) { return BinaryMask(m.data(), Resolution::Latent); }

}  // namespace fixtures
