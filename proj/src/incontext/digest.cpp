// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/digest.hpp"

#include "incontext/error.hpp"

#include <openssl/evp.h>

namespace incontext {

Sha256Builder::Sha256Builder() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::InvalidArgument, "digest", "cannot initialise SHA-256");
}

Sha256Builder::~Sha256Builder() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

Sha256Builder& Sha256Builder::update(std::span<const std::uint8_t> bytes) {
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), bytes.data(), bytes.size());
    return *this;
}

Sha256Builder& Sha256Builder::update(std::string_view text) {
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), text.data(), text.size());
    return *this;
}

Sha256Builder& Sha256Builder::update(const Tensor& tensor) {
    for (std::size_t d : tensor.shape()) {
        const auto v = static_cast<std::uint64_t>(d);
        EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), &v, sizeof v);
    }
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), tensor.data(), tensor.size() * sizeof(double));
    return *this;
}

Sha256 Sha256Builder::finish() {
    Sha256 out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out.data(), &len);
    return out;
}

Sha256 sha256(std::span<const std::uint8_t> bytes) { return Sha256Builder().update(bytes).finish(); }

std::string to_hex(const Sha256& digest) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (std::uint8_t b : digest) {
        s.push_back(kHex[b >> 4]);
        s.push_back(kHex[b & 0xf]);
    }
    return s;
}

}  // namespace incontext
