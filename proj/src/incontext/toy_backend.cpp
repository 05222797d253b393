// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/toy_backend.hpp"

#include "incontext/error.hpp"
#include "incontext/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

namespace incontext {
namespace {

constexpr const char* kModule = "backend";

static_assert(std::endian::native == std::endian::little, "parameter files assume a little-endian host");

struct ToyCache final : ForwardCache {
    Tensor x;    // [C,N]
    Tensor text; // [L,D]
    Tensor tau;  // [2]
    Tensor q;    // [N,inner]
    Tensor k;    // [L,inner]
    Tensor v;    // [L,inner]
    Tensor attn; // [heads,N,L]
    Tensor o;    // [N,inner]
    double signal = 1.0, sigma = 1.0;
    std::size_t height = 0, width = 0;
};

Tensor time_features(int t, int T) {
    const double phase = std::numbers::pi * 0.5 * static_cast<double>(t) / static_cast<double>(T);
    return Tensor::from({2}, {std::sin(phase), std::cos(phase)});
}

/// Constant plus smooth 2-D Fourier features of normalised pixel-centre coordinates.
std::vector<double> position_features(std::size_t i, std::size_t j, std::size_t h, std::size_t w) {
    const double u = 2.0 * (static_cast<double>(j) + 0.5) / static_cast<double>(w) - 1.0;
    const double v = 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(h) - 1.0;
    const double pi = std::numbers::pi;
    return {1.0, u, v, u * v, std::sin(pi * u), std::cos(pi * u), std::sin(pi * v), std::cos(pi * v),
            std::sin(2 * pi * u), std::cos(2 * pi * u), std::sin(2 * pi * v), std::cos(2 * pi * v),
            std::sin(pi * (u + v)), std::cos(pi * (u - v))};
}

ParameterMap init_params(const ToyConfig& cfg) {
    const std::size_t inner = cfg.num_heads * cfg.head_dim;
    const std::size_t n = cfg.height * cfg.width;
    Rng rng(derive_seed(cfg.seed, "toy.params"));
    ParameterMap p;
    p[ToyBackend::kToQ] = randn({inner, cfg.channels}, rng, 0.5 / std::sqrt(static_cast<double>(cfg.channels)));
    p[ToyBackend::kToQTime] = randn({inner, 2}, rng, 0.2);
    p[ToyBackend::kToK] = randn({inner, cfg.embed_dim}, rng, 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim)));
    p[ToyBackend::kToV] = randn({inner, cfg.embed_dim}, rng, 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim)));
    p[ToyBackend::kHeadOut] = randn({cfg.channels, inner}, rng, 0.5 / std::sqrt(static_cast<double>(inner)));
    p[ToyBackend::kHeadBias] = Tensor::zeros({cfg.channels});

    const std::size_t nf = position_features(0, 0, 1, 1).size();
    const Tensor proj = randn({inner, nf}, rng, 0.8 / std::sqrt(static_cast<double>(nf) / 4.0));
    Tensor qpos({n, inner});
    for (std::size_t i = 0; i < cfg.height; ++i)
        for (std::size_t j = 0; j < cfg.width; ++j) {
            const auto f = position_features(i, j, cfg.height, cfg.width);
            for (std::size_t a = 0; a < inner; ++a) {
                double s = 0.0;
                for (std::size_t b = 0; b < nf; ++b) s += proj.at(a, b) * f[b];
                qpos.at(i * cfg.width + j, a) = s;
            }
        }
    p[ToyBackend::kQueryPos] = std::move(qpos);
    return p;
}

void validate(const ToyConfig& cfg) {
    if (cfg.channels == 0 || cfg.height == 0 || cfg.width == 0 || cfg.embed_dim == 0 || cfg.num_heads == 0 ||
        cfg.head_dim == 0 || cfg.timesteps < 1)
        throw InvalidArgument(kModule, "toy backend dimensions must be >= 1");
}

const ToyCache& cache_of(const Prediction& pred) {
    const auto* c = dynamic_cast<const ToyCache*>(pred.cache.get());
    if (!c) throw InvalidArgument(kModule, "prediction was not produced by the toy backend");
    return *c;
}

std::vector<std::string> split_prompt(std::string_view prompt) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < prompt.size()) {
        while (i < prompt.size() && std::isspace(static_cast<unsigned char>(prompt[i]))) ++i;
        std::size_t j = i;
        while (j < prompt.size() && !std::isspace(static_cast<unsigned char>(prompt[j]))) ++j;
        if (j > i) {
            std::string chunk(prompt.substr(i, j - i));
            std::vector<std::string> trailing;
            while (chunk.size() > 1 && (chunk.back() == ',' || chunk.back() == '.' || chunk.back() == ';')) {
                trailing.emplace_back(1, chunk.back());
                chunk.pop_back();
            }
            out.push_back(chunk);
            out.insert(out.end(), trailing.rbegin(), trailing.rend());
        }
        i = j;
    }
    return out;
}

}  // namespace

ToyBackend::ToyBackend(const ToyConfig& config)
    : config_(config), schedule_(DiffusionSchedule::stable_diffusion(config.timesteps)) {
    validate(config_);
    params_ = init_params(config_);
}

ToyBackend::ToyBackend(const ToyConfig& config, ParameterMap params)
    : config_(config), schedule_(DiffusionSchedule::stable_diffusion(config.timesteps)), params_(std::move(params)) {
    validate(config_);
    const ParameterMap ref = init_params(config_);
    for (const auto& [name, t] : ref) {
        auto it = params_.find(name);
        if (it == params_.end()) throw FormatError(kModule, "missing toy parameter '" + name + "'");
        if (it->second.shape() != t.shape())
            throw ShapeError(kModule, "toy parameter '" + name + "' has shape " + shape_string(it->second.shape()) +
                                          ", expected " + shape_string(t.shape()));
    }
    if (params_.size() != ref.size()) throw FormatError(kModule, "unexpected extra toy parameters");
}

BackendDescriptor ToyBackend::descriptor() const {
    BackendDescriptor d;
    d.kind = BackendKind::Toy;
    d.channels = config_.channels;
    d.height = config_.height;
    d.width = config_.width;
    d.scale_factor = 1;
    d.attention_resolutions = {{config_.height, config_.width}};
    d.seed = config_.seed;
    d.embed_dim = config_.embed_dim;
    d.num_heads = config_.num_heads;
    d.head_dim = config_.head_dim;
    d.timesteps = schedule_.T();
    return d;
}

void ToyBackend::replace_schedule(DiffusionSchedule schedule) {
    for (int t = 1; t <= schedule.T(); ++t)
        if (schedule.alpha_bar(t) >= 1.0)
            throw InvalidArgument(kModule, "toy denoiser needs alphas_bar < 1 for t >= 1");
    schedule_ = std::move(schedule);
}

void ToyBackend::check_latent(const Tensor& x) const {
    if (x.rank() != 3 || x.dim(0) != config_.channels || x.dim(1) != config_.height || x.dim(2) != config_.width)
        throw ShapeError(kModule, "latent shape " + shape_string(x.shape()) + " does not match backend [" +
                                      std::to_string(config_.channels) + "," + std::to_string(config_.height) + "," +
                                      std::to_string(config_.width) + "]");
}

LatentImage ToyBackend::encode_image(const Tensor& image) const {
    check_latent(image);
    return LatentImage{image, 1};
}

Tensor ToyBackend::decode_latent(const LatentImage& latent) const {
    check_latent(latent.data);
    if (!latent.data.all_finite()) throw NumericError(kModule, "cannot decode a non-finite latent");
    Tensor out = latent.data;
    for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

Tensor ToyBackend::word_embedding(std::string_view word) const {
    std::string key(word);
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    return randn({config_.embed_dim}, derive_seed(config_.seed, "word:" + key));
}

TextEmbedding ToyBackend::encode_prompt(std::string_view prompt, std::span<const ConceptToken> tokens) const {
    std::set<std::string> names;
    for (const ConceptToken& tok : tokens) {
        if (!names.insert(tok.name).second) throw InvalidArgument(kModule, "duplicate concept token '" + tok.name + "'");
        if (tok.embedding.rank() != 1 || tok.embedding.size() != config_.embed_dim)
            throw ShapeError(kModule, "token '" + tok.name + "' embedding must be [" + std::to_string(config_.embed_dim) + "]");
        if (!tok.embedding.all_finite()) throw NumericError(kModule, "token '" + tok.name + "' embedding is not finite");
    }
    const auto words = split_prompt(prompt);
    if (words.empty()) throw InvalidArgument(kModule, "empty prompt");

    TextEmbedding out;
    out.data = Tensor({words.size(), config_.embed_dim});
    for (std::size_t pos = 0; pos < words.size(); ++pos) {
        const std::string& w = words[pos];
        Tensor row;
        TokenSlot slot{pos, w, false};
        if (w.size() >= 2 && w.front() == '[' && w.back() == ']') {
            const std::string name = w.substr(1, w.size() - 2);
            auto it = std::find_if(tokens.begin(), tokens.end(), [&](const ConceptToken& t) { return t.name == name; });
            if (it == tokens.end()) throw InvalidArgument(kModule, "unknown placeholder '" + w + "' in prompt");
            row = it->embedding;
            slot.token = name;
            slot.is_concept = true;
        } else if (w.find_first_of("[]{}") != std::string::npos) {
            throw InvalidArgument(kModule, "unknown placeholder '" + w + "' in prompt");
        } else {
            row = word_embedding(w);
            std::transform(slot.token.begin(), slot.token.end(), slot.token.begin(),
                           [](unsigned char c) { return std::tolower(c); });
        }
        std::copy(row.values().begin(), row.values().end(), out.data.data() + pos * config_.embed_dim);
        out.slots.push_back(std::move(slot));
    }
    return out;
}

Prediction ToyBackend::predict_noise(const LatentImage& x_t, const TextEmbedding& c, int t) const {
    check_latent(x_t.data);
    if (t < 1 || t > schedule_.T()) throw RangeError(kModule, "predict_noise timestep " + std::to_string(t) + " outside [1,T]");
    if (c.data.rank() != 2 || c.data.dim(1) != config_.embed_dim || c.data.dim(0) == 0)
        throw ShapeError(kModule, "text embedding must be [tokens," + std::to_string(config_.embed_dim) + "]");

    const std::size_t C = config_.channels, N = config_.height * config_.width, L = c.data.dim(0);
    const std::size_t D = config_.embed_dim, H = config_.num_heads, dh = config_.head_dim, inner = H * dh;
    const Tensor& wq = params_.at(kToQ);
    const Tensor& qpos = params_.at(kQueryPos);
    const Tensor& wt = params_.at(kToQTime);
    const Tensor& wk = params_.at(kToK);
    const Tensor& wv = params_.at(kToV);
    const Tensor& wout = params_.at(kHeadOut);
    const Tensor& bias = params_.at(kHeadBias);

    auto cache = std::make_shared<ToyCache>();
    cache->x = x_t.data.reshaped({C, N});
    cache->text = c.data;
    cache->tau = time_features(t, schedule_.T());
    cache->height = config_.height;
    cache->width = config_.width;
    const double ab = schedule_.alpha_bar(t);
    cache->signal = std::sqrt(ab);
    cache->sigma = std::sqrt(1.0 - ab);
    const Tensor& x = cache->x;

    Tensor q({N, inner});
    for (std::size_t a = 0; a < inner; ++a) {
        const double tb = wt.at(a, 0) * cache->tau[0] + wt.at(a, 1) * cache->tau[1];
        for (std::size_t n = 0; n < N; ++n) {
            double s = qpos.at(n, a) + tb;
            for (std::size_t ch = 0; ch < C; ++ch) s += wq.at(a, ch) * x.at(ch, n);
            q.at(n, a) = s;
        }
    }
    Tensor k({L, inner}), v({L, inner});
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t a = 0; a < inner; ++a) {
            double sk = 0.0, sv = 0.0;
            for (std::size_t d = 0; d < D; ++d) {
                sk += wk.at(a, d) * c.data.at(l, d);
                sv += wv.at(a, d) * c.data.at(l, d);
            }
            k.at(l, a) = sk;
            v.at(l, a) = sv;
        }

    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor attn({H, N, L});
    Tensor o({N, inner});
    std::vector<double> logits(L);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t n = 0; n < N; ++n) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t l = 0; l < L; ++l) {
                double s = 0.0;
                for (std::size_t e = h * dh; e < (h + 1) * dh; ++e) s += q.at(n, e) * k.at(l, e);
                logits[l] = s * scale;
                mx = std::max(mx, logits[l]);
            }
            double z = 0.0;
            for (std::size_t l = 0; l < L; ++l) {
                logits[l] = std::exp(logits[l] - mx);
                z += logits[l];
            }
            for (std::size_t l = 0; l < L; ++l) {
                const double a = logits[l] / z;
                attn.at(h, n, l) = a;
                for (std::size_t e = h * dh; e < (h + 1) * dh; ++e) o.at(n, e) += a * v.at(l, e);
            }
        }

    Prediction pred;
    pred.eps = Tensor(x_t.data.shape());
    for (std::size_t ch = 0; ch < C; ++ch)
        for (std::size_t n = 0; n < N; ++n) {
            double x0 = bias[ch];
            for (std::size_t a = 0; a < inner; ++a) x0 += wout.at(ch, a) * o.at(n, a);
            pred.eps[ch * N + n] = (x.at(ch, n) - cache->signal * x0) / cache->sigma;
        }

    Tensor map({H, L, config_.height, config_.width});
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t l = 0; l < L; ++l)
            for (std::size_t n = 0; n < N; ++n) map[(h * L + l) * N + n] = attn.at(h, n, l);
    pred.attention.maps.push_back(std::move(map));
    pred.attention.layer_tags.push_back(LayerTag::Up);

    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn = std::move(attn);
    cache->o = std::move(o);
    pred.cache = std::move(cache);
    return pred;
}

Gradients ToyBackend::backward(const Prediction& pred, const Tensor* grad_eps, const std::vector<Tensor>* grad_maps) const {
    const ToyCache& cc = cache_of(pred);
    const std::size_t C = config_.channels, N = config_.height * config_.width, L = cc.text.dim(0);
    const std::size_t D = config_.embed_dim, H = config_.num_heads, dh = config_.head_dim, inner = H * dh;
    const Tensor& wq = params_.at(kToQ);
    const Tensor& wk = params_.at(kToK);
    const Tensor& wv = params_.at(kToV);
    const Tensor& wout = params_.at(kHeadOut);

    Gradients g;
    g.latent = Tensor({C, N});
    g.text = Tensor({L, D});
    for (const auto& [name, t] : params_) g.params.emplace(name, Tensor(t.shape()));

    Tensor grad_attn({H, N, L});
    Tensor grad_o({N, inner});
    if (grad_eps) {
        if (grad_eps->size() != C * N) throw ShapeError(kModule, "grad_eps shape mismatch");
        Tensor& gb = g.params.at(kHeadBias);
        Tensor& gwout = g.params.at(kHeadOut);
        const double to_x0 = -cc.signal / cc.sigma;
        for (std::size_t ch = 0; ch < C; ++ch)
            for (std::size_t n = 0; n < N; ++n) {
                const double ge = (*grad_eps)[ch * N + n];
                g.latent.at(ch, n) += ge / cc.sigma;
                const double gx0 = to_x0 * ge;
                gb[ch] += gx0;
                for (std::size_t a = 0; a < inner; ++a) {
                    gwout.at(ch, a) += gx0 * cc.o.at(n, a);
                    grad_o.at(n, a) += wout.at(ch, a) * gx0;
                }
            }
    }
    if (grad_maps) {
        if (grad_maps->size() != 1 || (*grad_maps)[0].size() != H * L * N)
            throw ShapeError(kModule, "attention-map gradient does not match the record");
        const Tensor& gm = (*grad_maps)[0];
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t l = 0; l < L; ++l)
                for (std::size_t n = 0; n < N; ++n) grad_attn.at(h, n, l) += gm[(h * L + l) * N + n];
    }

    Tensor grad_v({L, inner});
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t l = 0; l < L; ++l) {
                double s = 0.0;
                const double a = cc.attn.at(h, n, l);
                for (std::size_t e = h * dh; e < (h + 1) * dh; ++e) {
                    s += grad_o.at(n, e) * cc.v.at(l, e);
                    grad_v.at(l, e) += a * grad_o.at(n, e);
                }
                grad_attn.at(h, n, l) += s;
            }

    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor grad_q({N, inner}), grad_k({L, inner});
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t n = 0; n < N; ++n) {
            double inner_sum = 0.0;
            for (std::size_t l = 0; l < L; ++l) inner_sum += cc.attn.at(h, n, l) * grad_attn.at(h, n, l);
            for (std::size_t l = 0; l < L; ++l) {
                const double gs = cc.attn.at(h, n, l) * (grad_attn.at(h, n, l) - inner_sum) * scale;
                if (gs == 0.0) continue;
                for (std::size_t e = h * dh; e < (h + 1) * dh; ++e) {
                    grad_q.at(n, e) += gs * cc.k.at(l, e);
                    grad_k.at(l, e) += gs * cc.q.at(n, e);
                }
            }
        }

    Tensor& gwq = g.params.at(kToQ);
    Tensor& gqpos = g.params.at(kQueryPos);
    Tensor& gwt = g.params.at(kToQTime);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t a = 0; a < inner; ++a) {
            const double gq = grad_q.at(n, a);
            gqpos.at(n, a) = gq;
            gwt.at(a, 0) += gq * cc.tau[0];
            gwt.at(a, 1) += gq * cc.tau[1];
            for (std::size_t ch = 0; ch < C; ++ch) {
                g.latent.at(ch, n) += wq.at(a, ch) * gq;
                gwq.at(a, ch) += gq * cc.x.at(ch, n);
            }
        }

    Tensor& gwk = g.params.at(kToK);
    Tensor& gwv = g.params.at(kToV);
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t a = 0; a < inner; ++a) {
            const double gk = grad_k.at(l, a), gv = grad_v.at(l, a);
            for (std::size_t d = 0; d < D; ++d) {
                gwk.at(a, d) += gk * cc.text.at(l, d);
                gwv.at(a, d) += gv * cc.text.at(l, d);
                g.text.at(l, d) += wk.at(a, d) * gk + wv.at(a, d) * gv;
            }
        }

    g.latent = g.latent.reshaped({C, cc.height, cc.width});
    return g;
}

std::vector<std::string> ToyBackend::trainable_params(TrainableSelector selector) const {
    if (selector == TrainableSelector::FreezeAll) return {};
    return {kToK, kToV};
}

void ToyBackend::plant_attention(const BinaryMask& region, const Tensor& token_embedding, double strength,
                                 std::span<const Tensor> others) {
    if (region.height() != config_.height || region.width() != config_.width)
        throw ShapeError(kModule, "planted region must be on the latent grid");
    const std::size_t D = config_.embed_dim, H = config_.num_heads, dh = config_.head_dim, inner = H * dh;
    const Tensor& wk = params_.at(kToK);
    auto key_of = [&](const Tensor& emb) {
        if (emb.size() != D) throw ShapeError(kModule, "planted token embedding size mismatch");
        Tensor key({inner});
        for (std::size_t a = 0; a < inner; ++a)
            for (std::size_t d = 0; d < D; ++d) key[a] += wk.at(a, d) * emb[d];
        return key;
    };
    const Tensor key = key_of(token_embedding);
    std::vector<Tensor> other_keys;
    for (const Tensor& o : others) other_keys.push_back(key_of(o));

    Tensor& qpos = params_.at(kQueryPos);
    const double root = std::sqrt(static_cast<double>(dh));
    for (std::size_t h = 0; h < H; ++h) {
        // Gram-Schmidt over the other keys of this head, then project them out.
        std::vector<std::vector<double>> basis;
        for (const Tensor& ok : other_keys) {
            std::vector<double> v(ok.values().begin() + h * dh, ok.values().begin() + (h + 1) * dh);
            for (const auto& b : basis) {
                double c = 0.0;
                for (std::size_t e = 0; e < dh; ++e) c += v[e] * b[e];
                for (std::size_t e = 0; e < dh; ++e) v[e] -= c * b[e];
            }
            double n = 0.0;
            for (double x : v) n += x * x;
            if (n < 1e-20) continue;
            for (double& x : v) x /= std::sqrt(n);
            basis.push_back(std::move(v));
        }
        std::vector<double> u(key.values().begin() + h * dh, key.values().begin() + (h + 1) * dh);
        for (const auto& b : basis) {
            double c = 0.0;
            for (std::size_t e = 0; e < dh; ++e) c += u[e] * b[e];
            for (std::size_t e = 0; e < dh; ++e) u[e] -= c * b[e];
        }
        double along = 0.0;
        for (std::size_t e = 0; e < dh; ++e) along += u[e] * key[h * dh + e];
        if (along <= 1e-12) throw InvalidArgument(kModule, "planted token key is not separable from the other tokens");
        for (std::size_t n = 0; n < config_.height * config_.width; ++n) {
            if (region.data()[n] == 0.0) continue;
            for (std::size_t e = 0; e < dh; ++e) qpos.at(n, h * dh + e) += strength * root * u[e] / along;
        }
    }
}

ToyBackend make_toy_backend(std::uint64_t seed, std::size_t channels, std::size_t height, std::size_t width,
                            std::size_t embed_dim, std::size_t num_heads) {
    ToyConfig cfg;
    cfg.seed = seed;
    cfg.channels = channels;
    cfg.height = height;
    cfg.width = width;
    cfg.embed_dim = embed_dim;
    cfg.num_heads = num_heads;
    cfg.head_dim = std::max<std::size_t>(2, embed_dim / std::max<std::size_t>(1, num_heads));
    return ToyBackend(cfg);
}

void save_toy_params(const ToyBackend& backend, const std::filesystem::path& bin_path,
                     const std::filesystem::path& json_path) {
    const ToyConfig& cfg = backend.config();
    nlohmann::ordered_json manifest;
    manifest["format"] = "incontext-toy-params";
    manifest["version"] = 1;
    manifest["config"] = {{"seed", cfg.seed},           {"channels", cfg.channels}, {"height", cfg.height},
                          {"width", cfg.width},         {"embed_dim", cfg.embed_dim}, {"num_heads", cfg.num_heads},
                          {"head_dim", cfg.head_dim},   {"timesteps", cfg.timesteps}};
    manifest["tensors"] = nlohmann::ordered_json::array();
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw IoError(kModule, "cannot write '" + bin_path.string() + "'");
    std::size_t offset = 0;
    for (const auto& [name, t] : backend.parameters()) {
        manifest["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
        bin.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
        offset += t.size();
    }
    manifest["count"] = offset;
    if (!bin) throw IoError(kModule, "short write to '" + bin_path.string() + "'");
    std::ofstream js(json_path);
    if (!js) throw IoError(kModule, "cannot write '" + json_path.string() + "'");
    js << manifest.dump(2) << '\n';
}

ToyBackend load_toy_params(const std::filesystem::path& bin_path, const std::filesystem::path& json_path) {
    std::ifstream js(json_path);
    if (!js) throw IoError(kModule, "cannot read '" + json_path.string() + "'");
    nlohmann::json manifest;
    try {
        js >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(kModule, std::string("bad parameter manifest: ") + e.what());
    }
    if (manifest.value("format", "") != "incontext-toy-params" || manifest.value("version", 0) != 1)
        throw VersionError(kModule, "unsupported parameter manifest");
    ToyConfig cfg;
    try {
        const auto& c = manifest.at("config");
        cfg.seed = c.at("seed").get<std::uint64_t>();
        cfg.channels = c.at("channels").get<std::size_t>();
        cfg.height = c.at("height").get<std::size_t>();
        cfg.width = c.at("width").get<std::size_t>();
        cfg.embed_dim = c.at("embed_dim").get<std::size_t>();
        cfg.num_heads = c.at("num_heads").get<std::size_t>();
        cfg.head_dim = c.at("head_dim").get<std::size_t>();
        cfg.timesteps = c.at("timesteps").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(kModule, std::string("bad parameter manifest: ") + e.what());
    }
    const std::size_t count = manifest.at("count").get<std::size_t>();
    std::vector<double> flat(count);
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw IoError(kModule, "cannot read '" + bin_path.string() + "'");
    bin.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (bin.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
        throw FormatError(kModule, "parameter file shorter than its manifest");
    ParameterMap params;
    for (const auto& entry : manifest.at("tensors")) {
        Shape shape = entry.at("shape").get<Shape>();
        const std::size_t off = entry.at("offset").get<std::size_t>();
        const std::size_t n = shape_numel(shape);
        if (off + n > count) throw FormatError(kModule, "tensor extends past the parameter file");
        params.emplace(entry.at("name").get<std::string>(),
                       Tensor(shape, std::vector<double>(flat.begin() + off, flat.begin() + off + n)));
    }
    return ToyBackend(cfg, std::move(params));
}

}  // namespace incontext
