// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/backend.hpp"

#include "incontext/digest.hpp"
#include "incontext/error.hpp"

#include <algorithm>

namespace incontext {

std::optional<std::size_t> TextEmbedding::find(std::string_view concept_name) const {
    for (const TokenSlot& s : slots)
        if (s.is_concept && s.token == concept_name) return s.position;
    return std::nullopt;
}

std::size_t TextEmbedding::position_of(std::string_view concept_name) const {
    if (auto p = find(concept_name)) return *p;
    throw InvalidArgument("backend", "token '" + std::string(concept_name) + "' is absent from the prompt");
}

Tensor token_gradient(const TextEmbedding& c, const Tensor& grad_text, std::string_view concept_name) {
    const std::size_t d = grad_text.dim(1);
    Tensor g({d});
    bool found = false;
    for (const TokenSlot& s : c.slots) {
        if (!s.is_concept || s.token != concept_name) continue;
        found = true;
        for (std::size_t k = 0; k < d; ++k) g[k] += grad_text.at(s.position, k);
    }
    if (!found) throw InvalidArgument("backend", "token '" + std::string(concept_name) + "' is absent from the prompt");
    return g;
}

std::string parameter_digest(const ParameterMap& params, std::span<const std::string> exclude) {
    Sha256Builder h;
    for (const auto& [name, tensor] : params) {
        if (std::find(exclude.begin(), exclude.end(), name) != exclude.end()) continue;
        h.update(name).update(tensor);
    }
    return to_hex(h.finish());
}

ParameterMap parameter_deltas(const ParameterMap& base, const ParameterMap& tuned, std::span<const std::string> names) {
    ParameterMap out;
    for (const std::string& name : names) {
        auto b = base.find(name);
        auto t = tuned.find(name);
        if (b == base.end() || t == tuned.end()) throw InvalidArgument("backend", "unknown parameter '" + name + "'");
        out.emplace(name, t->second - b->second);
    }
    return out;
}

void apply_deltas(ParameterMap& params, const ParameterMap& deltas) {
    for (const auto& [name, delta] : deltas) {
        auto it = params.find(name);
        if (it == params.end()) throw InvalidArgument("backend", "delta for unknown parameter '" + name + "'");
        require_same_shape(it->second, delta, "backend", "apply_deltas");
        it->second += delta;
    }
}

}  // namespace incontext
