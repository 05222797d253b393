// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/incontext.h"

#include "incontext/checkpoint.hpp"
#include "incontext/digest.hpp"
#include "incontext/error.hpp"
#include "incontext/image_io.hpp"
#include "incontext/serialize.hpp"

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

using namespace incontext;

namespace {

class HandleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NullArgument : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Unsupported : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

thread_local std::string g_last_error;

template <typename T, std::uint32_t Magic>
struct Handle {
    static constexpr std::uint32_t kMagic = Magic;
    std::uint32_t magic = Magic;
    T value;

    explicit Handle(T v) : value(std::move(v)) {}
    ~Handle() { magic = 0; }
};

struct BackendBox {
    std::unique_ptr<Backend> backend;
};

struct CheckpointBox {
    ConceptCheckpoint checkpoint;
    std::vector<LossRecord> trace;
    bool has_trace = false;
};

struct RegionBox {
    RegionTrainingResult result;
};

}  // namespace

struct ic_backend : Handle<BackendBox, 0x49434231> {
    using Handle::Handle;
};
struct ic_image : Handle<Tensor, 0x49434932> {
    using Handle::Handle;
};
struct ic_mask : Handle<BinaryMask, 0x49434D33> {
    using Handle::Handle;
};
struct ic_checkpoint : Handle<CheckpointBox, 0x49434334> {
    using Handle::Handle;
};
struct ic_region : Handle<RegionBox, 0x49435235> {
    using Handle::Handle;
};

namespace {

template <typename H>
auto& get(const H* h, const char* name) {
    if (!h) throw NullArgument(std::string(name) + " is null");
    if (h->magic != H::kMagic)
        throw HandleError(std::string(name) + " is not a live handle");
    return h->value;
}

const char* need(const char* s, const char* name) {
    if (!s) throw NullArgument(std::string(name) + " is null");
    return s;
}

template <typename T>
T* need_out(T* p, const char* name) {
    if (!p) throw NullArgument(std::string(name) + " is null");
    return p;
}

Json parse_json(const char* text, const char* name) {
    if (!text || !*text) return Json::object();
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("capi", std::string(name) + " is not valid JSON: " + e.what());
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

ic_status status_of(ErrorCode code) { return static_cast<ic_status>(static_cast<int>(code)); }

template <typename F>
ic_status guarded(F&& body) {
    try {
        body();
        g_last_error.clear();
        return IC_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.code());
    } catch (const NullArgument& e) {
        g_last_error = e.what();
        return IC_ERR_NULL_ARGUMENT;
    } catch (const HandleError& e) {
        g_last_error = e.what();
        return IC_ERR_BAD_HANDLE;
    } catch (const Unsupported& e) {
        g_last_error = e.what();
        return IC_ERR_UNSUPPORTED;
    } catch (const nlohmann::json::exception& e) {
        g_last_error = std::string("capi: ") + e.what();
        return IC_ERR_FORMAT;
    } catch (const std::exception& e) {
        g_last_error = std::string("internal: ") + e.what();
        return IC_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "internal: unknown exception";
        return IC_ERR_INTERNAL;
    }
}

Json default_backend_json() {
    const ToyConfig toy;
    Json j;
    j["kind"] = "toy";
    j["seed"] = toy.seed;
    j["height"] = toy.height;
    j["width"] = toy.width;
    j["embed_dim"] = toy.embed_dim;
    j["num_heads"] = toy.num_heads;
    j["timesteps"] = toy.timesteps;
    j["params_bin"] = "";
    j["params_json"] = "";
    j["path"] = "";
    return j;
}

std::unique_ptr<Backend> make_backend(const Json& cfg) {
    if (!cfg.is_object()) throw FormatError("capi", "backend config must be a JSON object");
    Json toy = Json::object();
    std::string kind = "toy", bin, json_path;
    for (const auto& [k, v] : cfg.items()) {
        if (k == "kind") kind = v.get<std::string>();
        else if (k == "params_bin") bin = v.get<std::string>();
        else if (k == "params_json") json_path = v.get<std::string>();
        else if (k == "path") continue;
        else if (!default_backend_json().contains(k))
            throw FormatError("serialize", "unknown key '" + k + "' in backend config");
        else toy[k] = v;
    }
    if (kind == "external")
        throw Unsupported("backend: external diffusion backends are not available in this build; use kind \"toy\"");
    if (kind != "toy") throw FormatError("backend", "unknown backend kind '" + kind + "'");
    if (bin.empty() != json_path.empty())
        throw InvalidArgument("backend", "params_bin and params_json must be given together");
    if (!bin.empty()) return std::make_unique<ToyBackend>(load_toy_params(bin, json_path));
    return std::make_unique<ToyBackend>(toy_config_from_json(toy));
}

Json trace_to_json(const EditResult& r) {
    Json steps = Json::array();
    for (const EditStepTrace& s : r.trace)
        steps.push_back({{"t", s.t}, {"objective_before", s.objective_before}, {"objective_after", s.objective_after}});
    return Json{{"steps", steps}, {"final_objective", r.final_objective}, {"warnings", r.warnings}};
}

}  // namespace

extern "C" {

const char* ic_version(void) { return "0.1.0"; }

const char* ic_status_name(ic_status status) {
    switch (status) {
        case IC_OK: return "ok";
        case IC_ERR_INVALID_ARGUMENT: return "invalid argument";
        case IC_ERR_SHAPE: return "shape mismatch";
        case IC_ERR_RANGE: return "out of range";
        case IC_ERR_IO: return "i/o error";
        case IC_ERR_FORMAT: return "format error";
        case IC_ERR_DIGEST: return "digest mismatch";
        case IC_ERR_VERSION: return "unsupported version";
        case IC_ERR_NUMERIC: return "numeric error";
        case IC_ERR_PRECONDITION: return "precondition violated";
        case IC_ERR_EMPTY_MASK: return "empty mask";
        case IC_ERR_NULL_ARGUMENT: return "null argument";
        case IC_ERR_BAD_HANDLE: return "bad handle";
        case IC_ERR_UNSUPPORTED: return "unsupported";
        case IC_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* ic_last_error(void) { return g_last_error.c_str(); }

void ic_string_free(char* s) { std::free(s); }

ic_status ic_default_config(const char* section, char** json_out) {
    return guarded([&] {
        const std::string name = need(section, "section");
        need_out(json_out, "json_out");
        Json j;
        if (name == "backend") j = default_backend_json();
        else if (name == "train") j = to_json(TrainingConfig{});
        else if (name == "edit") j = to_json(EditConfig{});
        else if (name == "generate") j = to_json(GenerationConfig{});
        else if (name == "region") j = to_json(RegionTrainingConfig{});
        else if (name == "extract") j = to_json(ExtractionConfig{});
        else throw InvalidArgument("capi", "unknown config section '" + name + "'");
        *json_out = dup_string(j.dump());
    });
}

ic_status ic_file_digest(const char* path, char** hex_out) {
    return guarded([&] {
        need_out(hex_out, "hex_out");
        std::ifstream in(need(path, "path"), std::ios::binary);
        if (!in) throw IoError("capi", std::string("cannot open ") + path);
        const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        *hex_out = dup_string(to_hex(sha256(bytes)));
    });
}

ic_status ic_build_prompt(const char* prompt_template, const char* object_class, const char* token_name,
                          char** prompt_out) {
    return guarded([&] {
        need_out(prompt_out, "prompt_out");
        *prompt_out = dup_string(build_prompt(need(prompt_template, "prompt_template"), need(object_class, "object_class"),
                                              need(token_name, "token_name")));
    });
}

unsigned long long ic_derive_seed(unsigned long long master, const char* tag) {
    return derive_seed(master, tag ? tag : "");
}

ic_status ic_backend_create(const char* backend_json, ic_backend** out) {
    return guarded([&] {
        need_out(out, "out");
        *out = new ic_backend(BackendBox{make_backend(parse_json(backend_json, "backend_json"))});
    });
}

ic_status ic_backend_save_params(const ic_backend* backend, const char* bin_path, const char* json_path) {
    return guarded([&] {
        const auto* toy = dynamic_cast<const ToyBackend*>(get(backend, "backend").backend.get());
        if (!toy) throw Unsupported("backend: only toy backends can be saved");
        save_toy_params(*toy, need(bin_path, "bin_path"), need(json_path, "json_path"));
    });
}

ic_status ic_backend_descriptor(const ic_backend* backend, char** json_out) {
    return guarded([&] {
        need_out(json_out, "json_out");
        *json_out = dup_string(to_json(get(backend, "backend").backend->descriptor()).dump());
    });
}

ic_status ic_backend_digest(const ic_backend* backend, char** hex_out) {
    return guarded([&] {
        need_out(hex_out, "hex_out");
        *hex_out = dup_string(parameter_digest(get(backend, "backend").backend->parameters()));
    });
}

void ic_backend_free(ic_backend* backend) { delete backend; }

ic_status ic_image_load(const char* path, ic_image** out) {
    return guarded([&] {
        need_out(out, "out");
        *out = new ic_image(load_image(need(path, "path")));
    });
}

ic_status ic_image_save(const ic_image* image, const char* path) {
    return guarded([&] { save_image(need(path, "path"), get(image, "image")); });
}

ic_status ic_image_create(size_t height, size_t width, const double* chw, ic_image** out) {
    return guarded([&] {
        need_out(out, "out");
        if (!chw) throw NullArgument("chw is null");
        if (height == 0 || width == 0) throw ShapeError("capi", "image dimensions must be positive");
        Tensor t({3, height, width});
        std::copy(chw, chw + t.size(), t.values().begin());
        if (!t.all_finite()) throw NumericError("capi", "image data must be finite");
        *out = new ic_image(std::move(t));
    });
}

ic_status ic_image_shape(const ic_image* image, size_t* height, size_t* width) {
    return guarded([&] {
        const Tensor& t = get(image, "image");
        *need_out(height, "height") = t.dim(1);
        *need_out(width, "width") = t.dim(2);
    });
}

ic_status ic_image_copy_data(const ic_image* image, double* out, size_t count) {
    return guarded([&] {
        const Tensor& t = get(image, "image");
        need_out(out, "out");
        if (count < t.size()) throw InvalidArgument("capi", "buffer holds " + std::to_string(count) + " values, need " +
                                                                std::to_string(t.size()));
        std::copy(t.values().begin(), t.values().end(), out);
    });
}

void ic_image_free(ic_image* image) { delete image; }

ic_status ic_mask_load(const char* path, ic_mask** out) {
    return guarded([&] {
        need_out(out, "out");
        *out = new ic_mask(load_mask(need(path, "path"), Resolution::Image));
    });
}

ic_status ic_mask_save(const ic_mask* mask, const char* path) {
    return guarded([&] { save_mask(need(path, "path"), get(mask, "mask")); });
}

ic_status ic_mask_create(size_t height, size_t width, const unsigned char* values, ic_mask** out) {
    return guarded([&] {
        need_out(out, "out");
        if (!values) throw NullArgument("values is null");
        if (height == 0 || width == 0) throw ShapeError("capi", "mask dimensions must be positive");
        Tensor t({height, width});
        for (std::size_t k = 0; k < t.size(); ++k) {
            if (values[k] > 1) throw InvalidArgument("capi", "mask values must be 0 or 1");
            t[k] = values[k];
        }
        *out = new ic_mask(BinaryMask(std::move(t), Resolution::Image));
    });
}

ic_status ic_mask_shape(const ic_mask* mask, size_t* height, size_t* width) {
    return guarded([&] {
        const BinaryMask& m = get(mask, "mask");
        *need_out(height, "height") = m.height();
        *need_out(width, "width") = m.width();
    });
}

ic_status ic_mask_copy_data(const ic_mask* mask, unsigned char* out, size_t count) {
    return guarded([&] {
        const Tensor& t = get(mask, "mask").data();
        need_out(out, "out");
        if (count < t.size()) throw InvalidArgument("capi", "buffer holds " + std::to_string(count) + " values, need " +
                                                                std::to_string(t.size()));
        for (std::size_t k = 0; k < t.size(); ++k) out[k] = t[k] != 0.0 ? 1 : 0;
    });
}

ic_status ic_mask_iou(const ic_mask* a, const ic_mask* b, double* out) {
    return guarded([&] { *need_out(out, "out") = iou(get(a, "a"), get(b, "b")); });
}

void ic_mask_free(ic_mask* mask) { delete mask; }

ic_status ic_learn(const ic_backend* base, const ic_image* image, const ic_mask* mask, const char* object_class,
                   const char* train_json, ic_checkpoint** out) {
    return guarded([&] {
        need_out(out, "out");
        const Backend& b = *get(base, "base").backend;
        const SourceSample sample{get(image, "image"), get(mask, "mask"), need(object_class, "object_class")};
        const TrainingConfig cfg = training_from_json(parse_json(train_json, "train_json"));
        TrainingResult r = train_concept(b, sample, cfg);
        *out = new ic_checkpoint(CheckpointBox{std::move(r.checkpoint), std::move(r.trace), true});
    });
}

ic_status ic_checkpoint_save(const ic_checkpoint* ckpt, const char* path) {
    return guarded([&] { save_checkpoint(get(ckpt, "ckpt").checkpoint, need(path, "path")); });
}

ic_status ic_checkpoint_load(const char* path, ic_checkpoint** out) {
    return guarded([&] {
        need_out(out, "out");
        *out = new ic_checkpoint(CheckpointBox{load_checkpoint(need(path, "path")), {}, false});
    });
}

ic_status ic_checkpoint_info(const ic_checkpoint* ckpt, char** json_out) {
    return guarded([&] {
        need_out(json_out, "json_out");
        const ConceptCheckpoint& c = get(ckpt, "ckpt").checkpoint;
        Json deltas = Json::array();
        for (const auto& [name, t] : c.ca_weight_deltas) deltas.push_back(name);
        const Json j{{"version", c.version},
                     {"token", {{"name", c.token.name}, {"init_source", c.token.init_source}}},
                     {"ca_weight_deltas", deltas},
                     {"config", to_json(c.config)},
                     {"backend", to_json(c.backend)},
                     {"base_digest", c.base_digest},
                     {"source_digest", c.source_digest}};
        *json_out = dup_string(j.dump());
    });
}

ic_status ic_checkpoint_write_trace(const ic_checkpoint* ckpt, const char* csv_path) {
    return guarded([&] {
        const CheckpointBox& box = get(ckpt, "ckpt");
        if (!box.has_trace) throw PreconditionError("checkpoint", "loss traces are not stored in checkpoint files");
        write_loss_trace(need(csv_path, "csv_path"), box.trace);
    });
}

ic_status ic_checkpoint_apply(const ic_backend* base, const ic_checkpoint* ckpt, ic_backend** tuned_out) {
    return guarded([&] {
        need_out(tuned_out, "tuned_out");
        auto tuned = apply_checkpoint(*get(base, "base").backend, get(ckpt, "ckpt").checkpoint);
        *tuned_out = new ic_backend(BackendBox{std::move(tuned)});
    });
}

void ic_checkpoint_free(ic_checkpoint* ckpt) { delete ckpt; }

ic_status ic_edit(const ic_backend* tuned, const ic_checkpoint* ckpt, const ic_image* image, const ic_mask* mask,
                  const char* prompt, const char* edit_json, ic_image** out, char** trace_json_out) {
    return guarded([&] {
        need_out(out, "out");
        const EditConfig cfg = edit_from_json(parse_json(edit_json, "edit_json"));
        const EditResult r = edit_image(*get(tuned, "tuned").backend, get(ckpt, "ckpt").checkpoint.token,
                                        get(image, "image"), get(mask, "mask"), need(prompt, "prompt"), cfg);
        auto img = std::make_unique<ic_image>(r.image);
        if (trace_json_out) *trace_json_out = dup_string(trace_to_json(r).dump());
        *out = img.release();
    });
}

ic_status ic_generate(const ic_backend* base, const ic_backend* tuned, const ic_checkpoint* ckpt,
                      const char* generate_json, ic_image** out) {
    return guarded([&] {
        need_out(out, "out");
        const GenerationConfig cfg = generation_from_json(parse_json(generate_json, "generate_json"));
        const GenerationResult r = generate_with_concept(*get(base, "base").backend, *get(tuned, "tuned").backend,
                                                         get(ckpt, "ckpt").checkpoint.token, cfg);
        *out = new ic_image(r.image);
    });
}

ic_status ic_learn_target_matcher(const ic_backend* tuned, const ic_checkpoint* ckpt, const ic_image* source,
                                  const ic_mask* source_mask, const char* object_class, const char* region_json,
                                  ic_region** out) {
    return guarded([&] {
        need_out(out, "out");
        const SourceSample sample{get(source, "source"), get(source_mask, "source_mask"),
                                  need(object_class, "object_class")};
        const RegionTrainingConfig cfg = region_training_from_json(parse_json(region_json, "region_json"));
        *out = new ic_region(RegionBox{learn_target_matcher(*get(tuned, "tuned").backend,
                                                            get(ckpt, "ckpt").checkpoint.token, sample, cfg)});
    });
}

ic_status ic_learn_common_concept(const ic_backend* base, const ic_image* const* images, size_t count,
                                  const char* object_class, const char* region_json, ic_region** out) {
    return guarded([&] {
        need_out(out, "out");
        if (!images && count > 0) throw NullArgument("images is null");
        std::vector<Tensor> imgs;
        for (size_t i = 0; i < count; ++i) imgs.push_back(get(images[i], "images[i]"));
        const RegionTrainingConfig cfg = region_training_from_json(parse_json(region_json, "region_json"));
        *out = new ic_region(RegionBox{
            learn_common_concept_token(*get(base, "base").backend, imgs, need(object_class, "object_class"), cfg)});
    });
}

ic_status ic_region_trace(const ic_region* region, char** json_out) {
    return guarded([&] {
        need_out(json_out, "json_out");
        *json_out = dup_string(Json(get(region, "region").result.loss_trace).dump());
    });
}

ic_status ic_extract_mask(const ic_backend* backend, const ic_region* region, const ic_image* image,
                          const char* extract_json, ic_mask** out, char** info_json_out) {
    return guarded([&] {
        need_out(out, "out");
        const RegionTrainingResult& r = get(region, "region").result;
        const Backend& b = *get(backend, "backend").backend;
        const ExtractionConfig cfg = extraction_from_json(parse_json(extract_json, "extract_json"));
        std::unique_ptr<Backend> adjusted;
        if (!r.ca_weight_deltas.empty()) {
            adjusted = b.clone();
            apply_deltas(adjusted->mutable_parameters(), r.ca_weight_deltas);
        }
        const Backend& use = adjusted ? *adjusted : b;
        const MatchResult m = r.region.trained_for == RegionPurpose::TargetMatching
                                  ? extract_target_mask(use, r.region, get(image, "image"), cfg)
                                  : extract_source_mask(use, r.region, get(image, "image"), cfg);
        auto mask = std::make_unique<ic_mask>(m.mask);
        if (info_json_out) {
            const Json info{{"confidence", m.confidence},
                            {"purpose", r.region.trained_for == RegionPurpose::TargetMatching ? "target_matching"
                                                                                              : "source_discovery"},
                            {"prompt", region_prompt(r.region)},
                            {"extraction", to_json(cfg)},
                            {"mask_area", m.mask.count()}};
            *info_json_out = dup_string(info.dump());
        }
        *out = mask.release();
    });
}

void ic_region_free(ic_region* region) { delete region; }

}  // extern "C"
