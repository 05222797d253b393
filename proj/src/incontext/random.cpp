// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/random.hpp"

namespace incontext {

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) { return splitmix64(master ^ fnv1a64(tag)); }

Tensor randn(const Shape& shape, Rng& rng, double stddev) {
    Tensor out(shape);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : out.values()) v = dist(rng);
    return out;
}

Tensor randn(const Shape& shape, std::uint64_t seed, double stddev) {
    Rng rng(seed);
    return randn(shape, rng, stddev);
}

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

bool bernoulli(Rng& rng, double p) {
    // Always draw so the stream position does not depend on p.
    const double u = uniform01(rng);
    return u < p;
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

}  // namespace incontext
