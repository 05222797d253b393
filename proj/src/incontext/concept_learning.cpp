// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/concept_learning.hpp"

#include "incontext/digest.hpp"
#include "incontext/error.hpp"
#include "incontext/losses.hpp"

#include <cmath>

namespace incontext {
namespace {

constexpr const char* kModule = "concept_learning";
constexpr std::string_view kObjectSlot = "{OBJECT}";

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

std::string resolve_token_slot(std::string_view tmpl, std::string_view token_name) {
    std::string out(tmpl);
    const std::string own = "[" + std::string(token_name) + "]";
    if (out.find(own) != std::string::npos) return out;
    if (out.find("[v*]") == std::string::npos)
        throw InvalidArgument(kModule, "prompt template '" + out + "' has no [v*] placeholder");
    replace_all(out, "[v*]", own);
    return out;
}

bool same_geometry(const BackendDescriptor& a, const BackendDescriptor& b) {
    return a.kind == b.kind && a.channels == b.channels && a.height == b.height && a.width == b.width &&
           a.scale_factor == b.scale_factor && a.embed_dim == b.embed_dim && a.num_heads == b.num_heads &&
           a.head_dim == b.head_dim && a.timesteps == b.timesteps;
}

}  // namespace

std::string build_prompt(std::string_view tmpl, std::string_view object_class, std::string_view token_name,
                         ZoomTag zoom) {
    if (tmpl.find(kObjectSlot) == std::string_view::npos)
        throw InvalidArgument(kModule, "prompt template '" + std::string(tmpl) + "' has no {OBJECT} placeholder");
    if (object_class.empty()) throw InvalidArgument(kModule, "object class must be nonempty");
    std::string out = resolve_token_slot(tmpl, token_name);
    replace_all(out, kObjectSlot, object_class);
    if (zoom == ZoomTag::Out) out += ", zoomed-out";
    if (zoom == ZoomTag::In) out += ", zoomed-in";
    return out;
}

std::string build_token_prompt(std::string_view tmpl, std::string_view token_name) {
    return resolve_token_slot(tmpl, token_name);
}

void TrainingConfig::validate() const {
    if (steps < 1) throw PreconditionError(kModule, "steps must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw RangeError(kModule, "learning_rate must be positive");
    if (!(lambda_att >= 0.0) || !(lambda_roi >= 0.0)) throw RangeError(kModule, "loss weights must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw RangeError(kModule, "alpha must lie in [0,1]");
    if (token_name.empty() || init_word.empty()) throw InvalidArgument(kModule, "token name and init word are required");
    augmentation.validate();
}

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(epsilon) {}

void Adam::apply(const std::string& name, Tensor& param, const Tensor& grad) {
    if (t_ < 1) throw PreconditionError(kModule, "Adam::next_step must precede apply");
    require_same_shape(param, grad, kModule, "Adam::apply");
    auto it = moments_.find(name);
    if (it == moments_.end()) it = moments_.emplace(name, Moments{Tensor(param.shape()), Tensor(param.shape())}).first;
    Moments& mo = it->second;
    const double c1 = 1.0 - std::pow(b1_, t_);
    const double c2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t k = 0; k < param.size(); ++k) {
        mo.m[k] = b1_ * mo.m[k] + (1.0 - b1_) * grad[k];
        mo.v[k] = b2_ * mo.v[k] + (1.0 - b2_) * grad[k] * grad[k];
        param[k] -= lr_ * (mo.m[k] / c1) / (std::sqrt(mo.v[k] / c2) + eps_);
    }
}

std::vector<LossProbe> make_loss_probes(const Backend& backend, std::size_t count, std::uint64_t seed) {
    const BackendDescriptor d = backend.descriptor();
    Rng rng(derive_seed(seed, "loss-probes"));
    std::vector<LossProbe> probes;
    for (std::size_t i = 0; i < count; ++i) {
        const int t = uniform_int(rng, 1, backend.schedule().T());
        probes.push_back({t, randn({d.channels, d.height, d.width}, rng)});
    }
    return probes;
}

LossEvaluation evaluate_concept_losses(const Backend& backend, const ConceptToken& token, const SourceSample& sample,
                                       ZoomTag zoom, const TrainingConfig& cfg, int t, const Tensor& eps,
                                       bool with_gradients) {
    const LatentImage x0 = backend.encode_image(sample.image);
    const BinaryMask mask_latent = resize_nearest(sample.mask, x0.height(), x0.width(), Resolution::Latent);
    const SoftMask soft = soften(mask_latent, cfg.alpha);
    const ConceptToken tokens[] = {token};
    const TextEmbedding c =
        backend.encode_prompt(build_prompt(sample.prompt_template, sample.object_class, token.name, zoom), tokens);
    const TextEmbedding c_star = backend.encode_prompt(build_token_prompt(kRoiTemplate, token.name), tokens);
    const LatentImage x_t = add_noise(x0, eps, t, backend.schedule());

    LossEvaluation out;
    out.losses.t = t;
    const Prediction pred = backend.predict_noise(x_t, c, t);
    Tensor grad_eps;
    std::vector<Tensor> grad_maps;
    out.losses.l_con = context_loss(pred.eps, eps, soft, with_gradients ? &grad_eps : nullptr);
    out.losses.l_att =
        attention_loss(pred.attention, c.position_of(token.name), sample.mask, with_gradients ? &grad_maps : nullptr);
    Gradients roi_grads;
    out.losses.l_roi = roi_loss(backend, x_t, mask_latent, c_star, t, eps, with_gradients ? &roi_grads : nullptr);
    out.losses.l_tot = total_loss(out.losses.l_con, out.losses.l_att, out.losses.l_roi, cfg.lambda_att, cfg.lambda_roi);
    if (!std::isfinite(out.losses.l_tot)) throw NumericError(kModule, "total loss is not finite");
    if (!with_gradients) return out;

    for (Tensor& g : grad_maps) g *= cfg.lambda_att;
    const Gradients g = backend.backward(pred, &grad_eps, &grad_maps);
    out.grad_token = token_gradient(c, g.text, token.name);
    out.grad_token.axpy(cfg.lambda_roi, token_gradient(c_star, roi_grads.text, token.name));
    for (const std::string& name : backend.trainable_params(TrainableSelector::CrossAttentionKV)) {
        Tensor total = g.params.at(name);
        total.axpy(cfg.lambda_roi, roi_grads.params.at(name));
        out.grad_params.emplace(name, std::move(total));
    }
    return out;
}

LossRecord mean_probe_losses(const Backend& backend, const ConceptToken& token, const SourceSample& sample,
                             const TrainingConfig& cfg, std::span<const LossProbe> probes) {
    if (probes.empty()) throw InvalidArgument(kModule, "at least one loss probe is required");
    LossRecord mean;
    for (const LossProbe& p : probes) {
        const LossRecord r = evaluate_concept_losses(backend, token, sample, ZoomTag::None, cfg, p.t, p.eps, false).losses;
        mean.l_con += r.l_con;
        mean.l_att += r.l_att;
        mean.l_roi += r.l_roi;
        mean.l_tot += r.l_tot;
    }
    const double n = static_cast<double>(probes.size());
    mean.l_con /= n;
    mean.l_att /= n;
    mean.l_roi /= n;
    mean.l_tot /= n;
    return mean;
}

std::string source_digest(const SourceSample& sample) {
    Sha256Builder h;
    h.update(sample.image).update(sample.mask.data()).update(sample.object_class);
    return to_hex(h.finish());
}

TrainingResult train_concept(const Backend& base, const SourceSample& sample, const TrainingConfig& cfg,
                             const std::function<void(const LossRecord&)>& on_step) {
    cfg.validate();
    sample.validate();
    if (!sample.mask.any()) throw PreconditionError(kModule, "source mask has zero area");

    std::unique_ptr<Backend> tuned = base.clone();
    const std::vector<std::string> trainable = tuned->trainable_params(TrainableSelector::CrossAttentionKV);
    ConceptToken token{cfg.token_name, tuned->word_embedding(cfg.init_word), cfg.init_word};

    Rng aug_rng(derive_seed(cfg.seed, "augment"));
    Rng noise_rng(derive_seed(cfg.seed, "noise"));
    const BackendDescriptor d = tuned->descriptor();
    const Shape latent_shape{d.channels, d.height, d.width};
    Adam adam(cfg.learning_rate);

    TrainingResult result;
    result.trace.reserve(static_cast<std::size_t>(cfg.steps));
    for (int step = 0; step < cfg.steps; ++step) {
        const AugmentedSample aug = augment(sample, cfg.augmentation, aug_rng);
        const int t = uniform_int(noise_rng, 1, tuned->schedule().T());
        const Tensor eps = randn(latent_shape, noise_rng);
        LossEvaluation ev = evaluate_concept_losses(*tuned, token, aug.sample, aug.zoom, cfg, t, eps, true);
        ev.losses.step = step;
        if (!ev.grad_token.all_finite()) throw NumericError(kModule, "non-finite gradient at step " + std::to_string(step));

        adam.next_step();
        adam.apply("token:" + token.name, token.embedding, ev.grad_token);
        for (const std::string& name : trainable) adam.apply(name, tuned->mutable_parameters().at(name), ev.grad_params.at(name));

        result.trace.push_back(ev.losses);
        if (on_step) on_step(ev.losses);
    }

    ConceptCheckpoint& ckpt = result.checkpoint;
    ckpt.token = std::move(token);
    ckpt.ca_weight_deltas = parameter_deltas(base.parameters(), tuned->parameters(), trainable);
    ckpt.config = cfg;
    ckpt.backend = base.descriptor();
    ckpt.base_digest = parameter_digest(base.parameters());
    ckpt.source_digest = source_digest(sample);
    return result;
}

std::unique_ptr<Backend> apply_checkpoint(const Backend& base, const ConceptCheckpoint& ckpt) {
    if (!same_geometry(base.descriptor(), ckpt.backend))
        throw PreconditionError(kModule, "checkpoint was trained on a backend of different geometry");
    if (!ckpt.base_digest.empty() && parameter_digest(base.parameters()) != ckpt.base_digest)
        throw PreconditionError(kModule, "checkpoint deltas were computed against different base weights");
    std::unique_ptr<Backend> tuned = base.clone();
    apply_deltas(tuned->mutable_parameters(), ckpt.ca_weight_deltas);
    return tuned;
}

}  // namespace incontext
