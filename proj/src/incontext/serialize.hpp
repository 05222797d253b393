// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "incontext/concept_learning.hpp"
#include "incontext/roi_matching.hpp"
#include "incontext/toy_backend.hpp"
#include "incontext/transfer.hpp"

#include "json.hpp"

namespace incontext {

using Json = nlohmann::ordered_json;

Json to_json(const AugmentationConfig& c);
Json to_json(const TrainingConfig& c);
Json to_json(const BackendDescriptor& d);
Json to_json(const ToyConfig& c);
Json to_json(const EditConfig& c);
Json to_json(const GenerationConfig& c);
Json to_json(const RegionTrainingConfig& c);
Json to_json(const ExtractionConfig& c);

/// Strict readers: every key must be known, missing keys keep their defaults.
AugmentationConfig augmentation_from_json(const Json& j);
TrainingConfig training_from_json(const Json& j);
BackendDescriptor descriptor_from_json(const Json& j);
/// head_dim is derived from embed_dim / num_heads unless given.
ToyConfig toy_config_from_json(const Json& j);
EditConfig edit_from_json(const Json& j);
GenerationConfig generation_from_json(const Json& j);
RegionTrainingConfig region_training_from_json(const Json& j);
ExtractionConfig extraction_from_json(const Json& j);

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view s);

}  // namespace incontext
