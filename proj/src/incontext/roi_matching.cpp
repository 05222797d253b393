// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/roi_matching.hpp"

#include "incontext/attention.hpp"
#include "incontext/error.hpp"
#include "incontext/losses.hpp"

#include <algorithm>
#include <cmath>

namespace incontext {
namespace {

constexpr const char* kModule = "roi_matching";

Shape latent_shape(const Backend& b) {
    const BackendDescriptor d = b.descriptor();
    return {d.channels, d.height, d.width};
}

TextEmbedding encode_region(const Backend& backend, const RegionToken& region, ZoomTag zoom = ZoomTag::None) {
    const ConceptToken tokens[] = {region.token};
    const char* tmpl =
        region.trained_for == RegionPurpose::TargetMatching ? kTargetRegionTemplate : kCommonConceptTemplate;
    return backend.encode_prompt(build_prompt(tmpl, region.object_class, region.token.name, zoom), tokens);
}

}  // namespace

void RegionTrainingConfig::validate(bool allow_zero_steps) const {
    if (steps < 0 || (steps == 0 && !allow_zero_steps)) throw PreconditionError(kModule, "steps must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw RangeError(kModule, "learning_rate must be positive");
    if (token_name.empty() || init_word.empty()) throw InvalidArgument(kModule, "token name and init word are required");
    augmentation.validate();
}

void ExtractionConfig::validate(int T) const {
    if (probe_timesteps.empty()) throw InvalidArgument(kModule, "at least one probe timestep is required");
    for (int t : probe_timesteps)
        if (t < 1 || t > T) throw RangeError(kModule, "probe timestep " + std::to_string(t) + " outside [1, T]");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw RangeError(kModule, "threshold must lie in [0,1]");
}

std::string region_prompt(const RegionToken& region) {
    const char* tmpl =
        region.trained_for == RegionPurpose::TargetMatching ? kTargetRegionTemplate : kCommonConceptTemplate;
    return build_prompt(tmpl, region.object_class, region.token.name);
}

RegionTrainingResult learn_target_matcher(const Backend& backend, const ConceptToken& v_star,
                                          const SourceSample& source, const RegionTrainingConfig& cfg) {
    cfg.validate(true);
    source.validate();
    if (v_star.embedding.size() == 0) throw PreconditionError(kModule, "target matching needs a learned v* token");

    RegionTrainingResult result;
    result.region = RegionToken{ConceptToken{cfg.token_name, v_star.embedding, v_star.name},
                                RegionPurpose::TargetMatching, source.object_class};
    ConceptToken& w = result.region.token;

    Rng aug_rng(derive_seed(cfg.seed, "match.augment"));
    Rng noise_rng(derive_seed(cfg.seed, "match.noise"));
    Adam adam(cfg.learning_rate);
    const Shape shape = latent_shape(backend);
    for (int step = 0; step < cfg.steps; ++step) {
        const AugmentedSample aug = augment(source, cfg.augmentation, aug_rng);
        const int t = uniform_int(noise_rng, 1, backend.schedule().T());
        const Tensor eps = randn(shape, noise_rng);
        const TextEmbedding c = encode_region(backend, result.region, aug.zoom);
        const LatentImage x_t = add_noise(backend.encode_image(aug.sample.image), eps, t, backend.schedule());
        const Prediction pred = backend.predict_noise(x_t, c, t);
        std::vector<Tensor> grad_maps;
        const double loss = attention_loss(pred.attention, c.position_of(w.name), aug.sample.mask, &grad_maps);
        if (!std::isfinite(loss)) throw NumericError(kModule, "non-finite attention loss at step " + std::to_string(step));
        const Gradients g = backend.backward(pred, nullptr, &grad_maps);
        adam.next_step();
        adam.apply("token:" + w.name, w.embedding, token_gradient(c, g.text, w.name));
        result.loss_trace.push_back(loss);
    }
    return result;
}

RegionTrainingResult learn_common_concept_token(const Backend& base, std::span<const Tensor> images,
                                                const std::string& object_class, const RegionTrainingConfig& cfg) {
    cfg.validate(false);
    if (images.size() < 2) throw PreconditionError(kModule, "common concept discovery needs at least two images");
    if (object_class.empty()) throw InvalidArgument(kModule, "object class must be nonempty");

    std::unique_ptr<Backend> tuned = base.clone();
    const std::vector<std::string> trainable = tuned->trainable_params(TrainableSelector::CrossAttentionKV);
    RegionTrainingResult result;
    result.region = RegionToken{ConceptToken{cfg.token_name, tuned->word_embedding(cfg.init_word), cfg.init_word},
                                RegionPurpose::SourceDiscovery, object_class};
    ConceptToken& w = result.region.token;

    Rng pick_rng(derive_seed(cfg.seed, "discover.pick"));
    Rng aug_rng(derive_seed(cfg.seed, "discover.augment"));
    Rng noise_rng(derive_seed(cfg.seed, "discover.noise"));
    Adam adam(cfg.learning_rate);
    const Shape shape = latent_shape(*tuned);
    for (int step = 0; step < cfg.steps; ++step) {
        const auto idx = static_cast<std::size_t>(uniform_int(pick_rng, 0, static_cast<int>(images.size()) - 1));
        const Tensor& img = images[idx];
        const SourceSample sample{img, BinaryMask::ones(img.dim(1), img.dim(2), Resolution::Image), object_class};
        const AugmentedSample aug = augment(sample, cfg.augmentation, aug_rng);
        const int t = uniform_int(noise_rng, 1, tuned->schedule().T());
        const Tensor eps = randn(shape, noise_rng);
        const TextEmbedding c = encode_region(*tuned, result.region, aug.zoom);
        const LatentImage x_t = add_noise(tuned->encode_image(aug.sample.image), eps, t, tuned->schedule());
        const Prediction pred = tuned->predict_noise(x_t, c, t);
        Tensor grad_eps;
        const double loss = diffusion_mse(pred.eps, eps, &grad_eps);
        if (!std::isfinite(loss)) throw NumericError(kModule, "non-finite diffusion loss at step " + std::to_string(step));
        const Gradients g = tuned->backward(pred, &grad_eps, nullptr);
        adam.next_step();
        adam.apply("token:" + w.name, w.embedding, token_gradient(c, g.text, w.name));
        for (const std::string& name : trainable) adam.apply(name, tuned->mutable_parameters().at(name), g.params.at(name));
        result.loss_trace.push_back(loss);
    }
    result.ca_weight_deltas = parameter_deltas(base.parameters(), tuned->parameters(), trainable);
    return result;
}

MatchResult extract_mask(const Backend& backend, const RegionToken& region, const Tensor& image,
                         const ExtractionConfig& cfg) {
    cfg.validate(backend.schedule().T());
    const LatentImage x0 = backend.encode_image(image);
    const TextEmbedding c = encode_region(backend, region);
    const std::size_t pos = c.position_of(region.token.name);

    Tensor sum;
    for (int t : cfg.probe_timesteps) {
        const Tensor eps = randn(x0.data.shape(), derive_seed(cfg.seed, "probe:" + std::to_string(t)));
        const Prediction pred = backend.predict_noise(add_noise(x0, eps, t, backend.schedule()), c, t);
        const Tensor map = aggregate_token_map(pred.attention, pos);
        if (sum.size() == 0) sum = Tensor(map.shape());
        sum += map;
    }
    const Tensor avg = sum * (1.0 / static_cast<double>(cfg.probe_timesteps.size()));
    const double lo = avg.min(), hi = avg.max();
    if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(hi))))
        throw EmptyMaskError(kModule, "attention map of " + region.token.name +
                                          " is constant over the image; no region can be extracted");

    MatchResult out{binarize_map(avg, cfg.threshold), min_max_normalize(avg), 0.0};
    if (cfg.largest_component) out.mask = largest_component(out.mask);
    double in = 0.0, outside = 0.0;
    std::size_t n_in = 0;
    for (std::size_t k = 0; k < out.raw_map.size(); ++k) {
        if (out.mask.data()[k] != 0.0) {
            in += out.raw_map[k];
            ++n_in;
        } else {
            outside += out.raw_map[k];
        }
    }
    const std::size_t n_out = out.raw_map.size() - n_in;
    out.confidence = (n_in ? in / static_cast<double>(n_in) : 0.0) - (n_out ? outside / static_cast<double>(n_out) : 0.0);
    out.mask = resize_nearest(out.mask, image.dim(1), image.dim(2), Resolution::Image);
    return out;
}

MatchResult extract_target_mask(const Backend& backend, const RegionToken& region, const Tensor& image,
                                const ExtractionConfig& cfg) {
    if (region.trained_for != RegionPurpose::TargetMatching)
        throw PreconditionError(kModule, "region token was not trained for target matching");
    return extract_mask(backend, region, image, cfg);
}

MatchResult extract_source_mask(const Backend& backend, const RegionToken& region, const Tensor& image,
                                const ExtractionConfig& cfg) {
    if (region.trained_for != RegionPurpose::SourceDiscovery)
        throw PreconditionError(kModule, "region token was not trained for source discovery");
    return extract_mask(backend, region, image, cfg);
}

double mean_probe_attention_loss(const Backend& backend, const RegionToken& region, const SourceSample& source,
                                 std::span<const LossProbe> probes) {
    if (probes.empty()) throw InvalidArgument(kModule, "at least one probe is required");
    const TextEmbedding c = encode_region(backend, region);
    const LatentImage x0 = backend.encode_image(source.image);
    double total = 0.0;
    for (const LossProbe& p : probes) {
        const Prediction pred = backend.predict_noise(add_noise(x0, p.eps, p.t, backend.schedule()), c, p.t);
        total += attention_loss(pred.attention, c.position_of(region.token.name), source.mask);
    }
    return total / static_cast<double>(probes.size());
}

double mean_probe_diffusion_loss(const Backend& backend, const RegionToken& region, std::span<const Tensor> images,
                                 std::span<const LossProbe> probes) {
    if (probes.empty() || images.empty()) throw InvalidArgument(kModule, "probes and images are required");
    const TextEmbedding c = encode_region(backend, region);
    double total = 0.0;
    for (const Tensor& img : images) {
        const LatentImage x0 = backend.encode_image(img);
        for (const LossProbe& p : probes)
            total += diffusion_mse(backend.predict_noise(add_noise(x0, p.eps, p.t, backend.schedule()), c, p.t).eps, p.eps);
    }
    return total / static_cast<double>(probes.size() * images.size());
}

}  // namespace incontext
