// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

// Owning wrappers over the C handles. Library failures become RunError.

#pragma once

#include "config.hpp"

#include "incontext/incontext.h"

#include <memory>
#include <string>

namespace incontext::cli {

struct HandleDeleter {
    void operator()(ic_backend* p) const { ic_backend_free(p); }
    void operator()(ic_image* p) const { ic_image_free(p); }
    void operator()(ic_mask* p) const { ic_mask_free(p); }
    void operator()(ic_checkpoint* p) const { ic_checkpoint_free(p); }
    void operator()(ic_region* p) const { ic_region_free(p); }
};

using Backend = std::unique_ptr<ic_backend, HandleDeleter>;
using Image = std::unique_ptr<ic_image, HandleDeleter>;
using Mask = std::unique_ptr<ic_mask, HandleDeleter>;
using Checkpoint = std::unique_ptr<ic_checkpoint, HandleDeleter>;
using Region = std::unique_ptr<ic_region, HandleDeleter>;

inline void check(ic_status status) {
    if (status != IC_OK) throw RunError(ic_last_error());
}

/// Takes ownership of a library string.
inline std::string take_string(char* s) {
    std::string out = s ? s : "";
    ic_string_free(s);
    return out;
}

}  // namespace incontext::cli
