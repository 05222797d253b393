// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/serialize.hpp"

#include "incontext/error.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <type_traits>

namespace incontext {
namespace {

constexpr const char* kModule = "serialize";

using FieldReaders = std::map<std::string, std::function<void(const Json&)>, std::less<>>;

void read_fields(const Json& j, const FieldReaders& readers, std::string_view what) {
    if (!j.is_object()) throw FormatError(kModule, std::string(what) + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        auto it = readers.find(key);
        if (it == readers.end()) throw FormatError(kModule, "unknown key '" + key + "' in " + std::string(what));
        try {
            it->second(value);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(kModule, "bad value for '" + key + "' in " + std::string(what) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError(kModule, "bad value for '" + key + "' in " + std::string(what) + ": " + e.what());
        }
    }
}

template <typename T>
std::function<void(const Json&)> into(T& field) {
    return [&field](const Json& v) {
        if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
            if (!v.is_number_integer()) throw FormatError(kModule, "expected an integer, got " + v.dump());
            if constexpr (std::is_unsigned_v<T>)
                if (v.get<std::int64_t>() < 0 && !v.is_number_unsigned())
                    throw FormatError(kModule, "expected a nonnegative integer, got " + v.dump());
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw FormatError(kModule, "expected a number, got " + v.dump());
        }
        field = v.get<T>();
    };
}

}  // namespace

std::string_view to_string(BackendKind kind) { return kind == BackendKind::Toy ? "toy" : "external"; }

BackendKind backend_kind_from_string(std::string_view s) {
    if (s == "toy") return BackendKind::Toy;
    if (s == "external") return BackendKind::External;
    throw FormatError(kModule, "unknown backend kind '" + std::string(s) + "'");
}

Json to_json(const AugmentationConfig& c) {
    return Json{{"p_hflip", c.p_hflip},
                {"p_grayscale", c.p_grayscale},
                {"p_zoom", c.p_zoom},
                {"p_jitter", c.p_jitter},
                {"zoom_min", c.zoom_min},
                {"zoom_max", c.zoom_max},
                {"jitter_brightness", c.jitter_brightness},
                {"jitter_contrast", c.jitter_contrast},
                {"jitter_saturation", c.jitter_saturation}};
}

Json to_json(const TrainingConfig& c) {
    return Json{{"steps", c.steps},
                {"learning_rate", c.learning_rate},
                {"lambda_att", c.lambda_att},
                {"lambda_roi", c.lambda_roi},
                {"alpha", c.alpha},
                {"seed", c.seed},
                {"optimizer", "adam"},
                {"init_word", c.init_word},
                {"token_name", c.token_name},
                {"augmentation", to_json(c.augmentation)}};
}

Json to_json(const BackendDescriptor& d) {
    Json res = Json::array();
    for (const auto& [h, w] : d.attention_resolutions) res.push_back({h, w});
    return Json{{"kind", to_string(d.kind)},
                {"channels", d.channels},
                {"height", d.height},
                {"width", d.width},
                {"scale_factor", d.scale_factor},
                {"attention_resolutions", res},
                {"trainable_selector", d.trainable_selector},
                {"seed", d.seed},
                {"embed_dim", d.embed_dim},
                {"num_heads", d.num_heads},
                {"head_dim", d.head_dim},
                {"timesteps", d.timesteps}};
}

AugmentationConfig augmentation_from_json(const Json& j) {
    AugmentationConfig c;
    read_fields(j,
                {{"p_hflip", into(c.p_hflip)},
                 {"p_grayscale", into(c.p_grayscale)},
                 {"p_zoom", into(c.p_zoom)},
                 {"p_jitter", into(c.p_jitter)},
                 {"zoom_min", into(c.zoom_min)},
                 {"zoom_max", into(c.zoom_max)},
                 {"jitter_brightness", into(c.jitter_brightness)},
                 {"jitter_contrast", into(c.jitter_contrast)},
                 {"jitter_saturation", into(c.jitter_saturation)}},
                "augmentation config");
    return c;
}

TrainingConfig training_from_json(const Json& j) {
    TrainingConfig c;
    read_fields(j,
                {{"steps", into(c.steps)},
                 {"learning_rate", into(c.learning_rate)},
                 {"lambda_att", into(c.lambda_att)},
                 {"lambda_roi", into(c.lambda_roi)},
                 {"alpha", into(c.alpha)},
                 {"seed", into(c.seed)},
                 {"optimizer",
                  [](const Json& v) {
                      if (v.get<std::string>() != "adam") throw FormatError(kModule, "only the adam optimizer is supported");
                  }},
                 {"init_word", into(c.init_word)},
                 {"token_name", into(c.token_name)},
                 {"augmentation", [&c](const Json& v) { c.augmentation = augmentation_from_json(v); }}},
                "training config");
    return c;
}

BackendDescriptor descriptor_from_json(const Json& j) {
    BackendDescriptor d;
    read_fields(j,
                {{"kind", [&d](const Json& v) { d.kind = backend_kind_from_string(v.get<std::string>()); }},
                 {"channels", into(d.channels)},
                 {"height", into(d.height)},
                 {"width", into(d.width)},
                 {"scale_factor", into(d.scale_factor)},
                 {"attention_resolutions",
                  [&d](const Json& v) {
                      d.attention_resolutions.clear();
                      for (const auto& r : v) d.attention_resolutions.emplace_back(r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>());
                  }},
                 {"trainable_selector", into(d.trainable_selector)},
                 {"seed", into(d.seed)},
                 {"embed_dim", into(d.embed_dim)},
                 {"num_heads", into(d.num_heads)},
                 {"head_dim", into(d.head_dim)},
                 {"timesteps", into(d.timesteps)}},
                "backend descriptor");
    return d;
}

Json to_json(const ToyConfig& c) {
    return Json{{"seed", c.seed},
                {"channels", c.channels},
                {"height", c.height},
                {"width", c.width},
                {"embed_dim", c.embed_dim},
                {"num_heads", c.num_heads},
                {"head_dim", c.head_dim},
                {"timesteps", c.timesteps}};
}

ToyConfig toy_config_from_json(const Json& j) {
    ToyConfig c;
    bool head_dim_given = false;
    read_fields(j,
                {{"seed", into(c.seed)},
                 {"channels", into(c.channels)},
                 {"height", into(c.height)},
                 {"width", into(c.width)},
                 {"embed_dim", into(c.embed_dim)},
                 {"num_heads", into(c.num_heads)},
                 {"head_dim", [&](const Json& v) { c.head_dim = v.get<std::size_t>(); head_dim_given = true; }},
                 {"timesteps", into(c.timesteps)}},
                "toy backend config");
    if (!head_dim_given) c.head_dim = std::max<std::size_t>(2, c.embed_dim / std::max<std::size_t>(1, c.num_heads));
    return c;
}

Json to_json(const EditConfig& c) {
    return Json{{"t_start", c.t_start},
                {"eta", c.eta},
                {"guidance_iters_per_step", c.guidance_iters_per_step},
                {"blend_mode", to_string(c.blend_mode)},
                {"seed", c.seed}};
}

EditConfig edit_from_json(const Json& j) {
    EditConfig c;
    read_fields(j,
                {{"t_start", into(c.t_start)},
                 {"eta", into(c.eta)},
                 {"guidance_iters_per_step", into(c.guidance_iters_per_step)},
                 {"blend_mode",
                  [&c](const Json& v) {
                      try {
                          c.blend_mode = blend_mode_from_string(v.get<std::string>());
                      } catch (const InvalidArgument& e) {
                          throw FormatError(kModule, e.what());
                      }
                  }},
                 {"seed", into(c.seed)}},
                "edit config");
    return c;
}

Json to_json(const GenerationConfig& c) {
    return Json{{"t_s", c.t_s},
                {"object_class", c.object_class},
                {"seed", c.seed},
                {"base_prompt", c.base_prompt},
                {"concept_prompt", c.concept_prompt}};
}

GenerationConfig generation_from_json(const Json& j) {
    GenerationConfig c;
    read_fields(j,
                {{"t_s", into(c.t_s)},
                 {"object_class", into(c.object_class)},
                 {"seed", into(c.seed)},
                 {"base_prompt", into(c.base_prompt)},
                 {"concept_prompt", into(c.concept_prompt)}},
                "generation config");
    return c;
}

Json to_json(const RegionTrainingConfig& c) {
    return Json{{"steps", c.steps},
                {"learning_rate", c.learning_rate},
                {"seed", c.seed},
                {"token_name", c.token_name},
                {"init_word", c.init_word},
                {"augmentation", to_json(c.augmentation)}};
}

RegionTrainingConfig region_training_from_json(const Json& j) {
    RegionTrainingConfig c;
    read_fields(j,
                {{"steps", into(c.steps)},
                 {"learning_rate", into(c.learning_rate)},
                 {"seed", into(c.seed)},
                 {"token_name", into(c.token_name)},
                 {"init_word", into(c.init_word)},
                 {"augmentation", [&c](const Json& v) { c.augmentation = augmentation_from_json(v); }}},
                "region training config");
    return c;
}

Json to_json(const ExtractionConfig& c) {
    return Json{{"probe_timesteps", c.probe_timesteps},
                {"threshold", c.threshold},
                {"largest_component", c.largest_component},
                {"seed", c.seed}};
}

ExtractionConfig extraction_from_json(const Json& j) {
    ExtractionConfig c;
    read_fields(j,
                {{"probe_timesteps", into(c.probe_timesteps)},
                 {"threshold", into(c.threshold)},
                 {"largest_component", into(c.largest_component)},
                 {"seed", into(c.seed)}},
                "extraction config");
    return c;
}

}  // namespace incontext
