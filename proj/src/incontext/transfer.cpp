// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/transfer.hpp"

#include "incontext/attention.hpp"
#include "incontext/concept_learning.hpp"
#include "incontext/error.hpp"
#include "incontext/random.hpp"

namespace incontext {
namespace {

constexpr const char* kModule = "transfer";

std::string substitute_object(std::string_view tmpl, std::string_view object_class) {
    std::string out(tmpl);
    const std::string_view slot = "{OBJECT}";
    for (std::size_t pos = out.find(slot); pos != std::string::npos; pos = out.find(slot, pos + object_class.size()))
        out.replace(pos, slot.size(), object_class);
    return out;
}

}  // namespace

std::string_view to_string(BlendMode mode) { return mode == BlendMode::NoiseMatched ? "noise_matched" : "fixed_start"; }

BlendMode blend_mode_from_string(std::string_view s) {
    if (s == "noise_matched") return BlendMode::NoiseMatched;
    if (s == "fixed_start") return BlendMode::FixedStart;
    throw InvalidArgument(kModule, "unknown blend mode '" + std::string(s) + "'");
}

void EditConfig::validate(int T) const {
    if (t_start < 0 || t_start > T)
        throw RangeError(kModule, "t_start " + std::to_string(t_start) + " outside [0, " + std::to_string(T) + "]");
    if (!(eta >= 0.0)) throw RangeError(kModule, "eta must be >= 0");
    if (guidance_iters_per_step < 0) throw RangeError(kModule, "guidance_iters_per_step must be >= 0");
}

std::optional<std::string> t_start_warning(int t_start) {
    if (t_start >= kRecommendedTStartMin && t_start <= kRecommendedTStartMax) return std::nullopt;
    return "t_start " + std::to_string(t_start) + " is outside the recommended window [" +
           std::to_string(kRecommendedTStartMin) + ", " + std::to_string(kRecommendedTStartMax) + "]";
}

NoisedStart noise_to_tstart(const LatentImage& x_tg, int t_start, const DiffusionSchedule& sched, std::uint64_t seed) {
    if (t_start < 0 || t_start > sched.T())
        throw RangeError(kModule, "t_start " + std::to_string(t_start) + " outside [0, " + std::to_string(sched.T()) + "]");
    Tensor eps = randn(x_tg.data.shape(), derive_seed(seed, "edit.noise"));
    return {add_noise(x_tg, eps, t_start, sched), std::move(eps)};
}

LatentImage blend_step(const LatentImage& x_t, const LatentImage& reference, const BinaryMask& mask_latent) {
    require_same_shape(x_t.data, reference.data, kModule, "blend_step");
    if (x_t.data.rank() != 3 || mask_latent.height() != x_t.height() || mask_latent.width() != x_t.width())
        throw ShapeError(kModule, "blend mask " + shape_string(mask_latent.data().shape()) + " does not match latent " +
                                      shape_string(x_t.data.shape()));
    LatentImage out = reference;
    const std::size_t plane = mask_latent.data().size();
    for (std::size_t k = 0; k < out.data.size(); ++k)
        if (mask_latent.data()[k % plane] != 0.0) out.data[k] = x_t.data[k];
    return out;
}

GuidanceEval guidance_objective(const Backend& backend, const LatentImage& x, const TextEmbedding& c,
                                std::string_view token, int t, const BinaryMask& mask, bool with_grad) {
    const Prediction pred = backend.predict_noise(x, c, t);
    const std::size_t pos = c.position_of(token);
    const std::vector<Tensor> maps = per_layer_token_maps(pred.attention, pos);
    if (maps.empty()) throw PreconditionError(kModule, "no upsampling-block attention was recorded");
    const Tensor target = resize_bilinear(mask, maps.front().dim(0), maps.front().dim(1));
    const double layers = static_cast<double>(maps.size());

    GuidanceEval out;
    std::vector<Tensor> grads;
    for (const Tensor& m : maps) {
        Tensor g(m.shape());
        for (std::size_t k = 0; k < m.size(); ++k) {
            const double r = m[k] - target[k];
            out.objective += r * r / layers;
            g[k] = 2.0 * r / layers;
        }
        grads.push_back(std::move(g));
    }
    if (with_grad) {
        const std::vector<Tensor> grad_maps = per_layer_token_maps_backward(pred.attention, pos, grads);
        out.grad = backend.backward(pred, nullptr, &grad_maps).latent;
        if (!out.grad.all_finite()) throw NumericError(kModule, "non-finite guidance gradient at t=" + std::to_string(t));
    }
    return out;
}

LatentImage guidance_step(const Backend& backend, const LatentImage& x, const TextEmbedding& c, std::string_view token,
                          int t, const BinaryMask& mask, double eta) {
    if (!(eta >= 0.0)) throw RangeError(kModule, "eta must be >= 0");
    if (eta == 0.0) return x;
    const GuidanceEval ev = guidance_objective(backend, x, c, token, t, mask, true);
    LatentImage out = x;
    out.data.axpy(-eta, ev.grad);
    return out;
}

EditResult edit_image(const Backend& backend, const ConceptToken& token, const Tensor& image, const BinaryMask& mask,
                      std::string_view prompt, const EditConfig& cfg) {
    const DiffusionSchedule& sched = backend.schedule();
    cfg.validate(sched.T());
    EditResult result;
    if (auto w = t_start_warning(cfg.t_start)) result.warnings.push_back(*w);

    const ConceptToken tokens[] = {token};
    const TextEmbedding c = backend.encode_prompt(prompt, tokens);
    if (!c.find(token.name)) throw InvalidArgument(kModule, "edit prompt does not mention [" + token.name + "]");

    if (image.rank() != 3 || mask.height() != image.dim(1) || mask.width() != image.dim(2))
        throw ShapeError(kModule, "edit mask " + shape_string(mask.data().shape()) + " does not match image " +
                                      shape_string(image.shape()));
    result.x_tg = backend.encode_image(image);
    const LatentImage& x_tg = result.x_tg;
    const BinaryMask mask_latent = resize_nearest(mask, x_tg.height(), x_tg.width(), Resolution::Latent);
    const NoisedStart start = noise_to_tstart(x_tg, cfg.t_start, sched, cfg.seed);

    LatentImage x = start.x_start;
    for (int t = cfg.t_start; t >= 1; --t) {
        const LatentImage reference =
            cfg.blend_mode == BlendMode::NoiseMatched ? add_noise(x_tg, start.eps, t, sched) : start.x_start;
        LatentImage guided = blend_step(x, reference, mask_latent);
        EditStepTrace step{t, 0.0, 0.0};
        step.objective_before = guidance_objective(backend, guided, c, token.name, t, mask, false).objective;
        for (int it = 0; it < cfg.guidance_iters_per_step; ++it)
            guided = guidance_step(backend, guided, c, token.name, t, mask, cfg.eta);
        step.objective_after = guidance_objective(backend, guided, c, token.name, t, mask, false).objective;
        result.trace.push_back(step);
        result.final_objective = step.objective_after;

        const Prediction pred = backend.predict_noise(guided, c, t);
        x = denoise_step(guided, pred.eps, t, sched);
    }
    result.latent = blend_step(x, x_tg, mask_latent);
    result.image = backend.decode_latent(result.latent);
    return result;
}

void GenerationConfig::validate(int T) const {
    if (t_s < 0 || t_s > T) throw RangeError(kModule, "t_s " + std::to_string(t_s) + " outside [0, " + std::to_string(T) + "]");
    if (object_class.empty()) throw InvalidArgument(kModule, "object class must be nonempty");
}

GenerationResult generate_with_concept(const Backend& base, const Backend& tuned, const ConceptToken& token,
                                       const GenerationConfig& cfg) {
    const BackendDescriptor a = base.descriptor(), b = tuned.descriptor();
    if (a.channels != b.channels || a.height != b.height || a.width != b.width || a.embed_dim != b.embed_dim ||
        !(base.schedule() == tuned.schedule()))
        throw PreconditionError(kModule, "base and tuned backends differ in latent geometry or schedule");
    const int T = base.schedule().T();
    cfg.validate(T);

    const ConceptToken tokens[] = {token};
    const TextEmbedding c_base = base.encode_prompt(substitute_object(cfg.base_prompt, cfg.object_class), tokens);
    const TextEmbedding c_tuned = tuned.encode_prompt(build_prompt(cfg.concept_prompt, cfg.object_class, token.name), tokens);

    LatentImage x{randn({a.channels, a.height, a.width}, derive_seed(cfg.seed, "generate.init")), a.scale_factor};
    for (int t = T; t >= 1; --t) {
        const bool early = (T - t) < cfg.t_s;
        const Backend& model = early ? base : tuned;
        const Prediction pred = model.predict_noise(x, early ? c_base : c_tuned, t);
        x = denoise_step(x, pred.eps, t, model.schedule());
    }
    const Backend& decoder = cfg.t_s >= T ? base : tuned;
    return GenerationResult{decoder.decode_latent(x), x};
}

}  // namespace incontext
