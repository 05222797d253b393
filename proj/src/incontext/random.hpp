// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "incontext/tensor.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace incontext {

using Rng = std::mt19937_64;

std::uint64_t fnv1a64(std::string_view text);
std::uint64_t splitmix64(std::uint64_t x);

/// Fan a master seed out to a named subsystem: splitmix64(master ^ fnv1a64(tag)).
/// The rule is recorded in run manifests, so keep it stable.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

Tensor randn(const Shape& shape, Rng& rng, double stddev = 1.0);
Tensor randn(const Shape& shape, std::uint64_t seed, double stddev = 1.0);

double uniform01(Rng& rng);
bool bernoulli(Rng& rng, double p);
/// Uniform integer in [lo, hi].
int uniform_int(Rng& rng, int lo, int hi);

}  // namespace incontext
