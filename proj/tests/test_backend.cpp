// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/attention.hpp"
#include "incontext/error.hpp"
#include "incontext/random.hpp"
#include "incontext/toy_backend.hpp"

#include "doctest.h"
#include "oracles.hpp"

using namespace incontext;

namespace {

ConceptToken make_token(const Backend& b, std::string name, const std::string& init = "style") {
    return ConceptToken{std::move(name), b.word_embedding(init), init};
}

/// Random linear functional of eps and the attention maps, so one backward pass
/// checks every path through the denoiser.
struct Probe {
    Tensor eps_weights;
    Tensor map_weights;

    double operator()(const Prediction& p) const {
        return dot(p.eps, eps_weights) + dot(p.attention.maps[0], map_weights);
    }
};

}  // namespace

TEST_CASE("toy codec is the identity") {
    const ToyBackend b = make_toy_backend(1, 3, 4, 5, 8, 2);
    std::mt19937_64 rng(1);
    const Tensor img = oracle::random_tensor({3, 4, 5}, rng, 0.0, 1.0);
    const LatentImage lat = b.encode_image(img);
    CHECK(lat.data == img);
    CHECK(lat.scale_factor == 1);
    CHECK(b.decode_latent(lat) == img);
    CHECK(b.decode_latent(LatentImage{Tensor::zeros({3, 4, 5}), 1}) == Tensor::zeros({3, 4, 5}));
    CHECK_THROWS_AS(b.encode_image(Tensor({3, 4, 4})), ShapeError);

    Tensor wild = img * 3.0;
    wild[0] = -2.0;
    const Tensor clipped = b.decode_latent(LatentImage{wild, 1});
    CHECK(clipped.min() >= 0.0);
    CHECK(clipped.max() <= 1.0);
}

TEST_CASE("encode_prompt records concept slots") {
    const ToyBackend b = make_toy_backend(2, 3, 4, 4, 8, 2);
    const ConceptToken v = make_token(b, "v*");
    const ConceptToken toks[] = {v};
    const TextEmbedding c = b.encode_prompt("A chair with [v*] style", toks);
    CHECK(c.num_tokens() == 5);
    CHECK(c.position_of("v*") == 3);
    for (std::size_t d = 0; d < 8; ++d) CHECK(c.data.at(3, d) == v.embedding[d]);

    const TextEmbedding photo = b.encode_prompt("A photo of [v*]", toks);
    CHECK(photo.position_of("v*") == 3);

    const TextEmbedding again = b.encode_prompt("A chair with [v*] style", toks);
    CHECK(bit_identical(c.data, again.data));

    const TextEmbedding punct = b.encode_prompt("a photo of an chair, with [v*] style", toks);
    CHECK(punct.num_tokens() == 9);
    CHECK(punct.slots[5].token == ",");

    CHECK_THROWS_AS(b.encode_prompt("A chair with [w*] style", toks), InvalidArgument);
    CHECK_THROWS_AS(b.encode_prompt("A {OBJECT} with [v*] style", toks), InvalidArgument);
    CHECK_THROWS_AS(b.encode_prompt("   ", toks), InvalidArgument);
    const ConceptToken dup[] = {v, v};
    CHECK_THROWS_AS(b.encode_prompt("[v*]", dup), InvalidArgument);
}

TEST_CASE("add_noise closed form") {
    const DiffusionSchedule sched({1.0, 0.25});
    const LatentImage x0{Tensor::from({1, 1, 1}, {1.0}), 1};
    CHECK(add_noise(x0, Tensor::zeros({1, 1, 1}), 1, sched).data[0] == 0.5);

    const DiffusionSchedule sd = DiffusionSchedule::stable_diffusion(50);
    std::mt19937_64 rng(3);
    const LatentImage x{oracle::random_tensor({2, 3, 3}, rng), 1};
    Tensor eps = oracle::random_tensor({2, 3, 3}, rng);
    CHECK(bit_identical(add_noise(x, eps, 0, sd).data, x.data));
    const LatentImage clean = add_noise(x, Tensor::zeros({2, 3, 3}), 17, sd);
    for (std::size_t i = 0; i < clean.data.size(); ++i)
        CHECK(clean.data[i] == doctest::Approx(std::sqrt(sd.alpha_bar(17)) * x.data[i]).epsilon(1e-15));
    CHECK_THROWS_AS(add_noise(x, eps, 51, sd), RangeError);
    CHECK_THROWS_AS(add_noise(x, eps, -1, sd), RangeError);
}

TEST_CASE("schedule validation and defaults") {
    const DiffusionSchedule sd = DiffusionSchedule::stable_diffusion(50);
    CHECK(sd.T() == 50);
    CHECK(sd.alpha_bar(0) == 1.0);
    for (int t = 1; t <= 50; ++t) CHECK(sd.alpha_bar(t) < sd.alpha_bar(t - 1));
    CHECK(sd.alpha_bar(50) > 0.0);
    CHECK_THROWS_AS(DiffusionSchedule({0.9, 0.5}), InvalidArgument);
    CHECK_THROWS_AS(DiffusionSchedule({1.0, 0.5, 0.6}), InvalidArgument);
    CHECK_THROWS_AS(DiffusionSchedule({1.0, 0.0}), InvalidArgument);
}

TEST_CASE("true-noise DDIM chain recovers x0") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const int T = 10 + static_cast<int>(rng() % 41);
        const DiffusionSchedule sched =
            trial % 2 ? DiffusionSchedule::stable_diffusion(T) : DiffusionSchedule::linear(T, 0.01 + 0.1 * (rng() % 5));
        const LatentImage x0{oracle::random_tensor({3, 4, 4}, rng), 1};
        const Tensor eps = randn({3, 4, 4}, rng);
        LatentImage x = add_noise(x0, eps, T, sched);
        for (int t = T; t >= 1; --t) x = denoise_step(x, eps, t, sched);
        CHECK(max_abs_diff(x.data, x0.data) <= 1e-4);

        const LatentImage x1 = add_noise(x0, eps, 1, sched);
        CHECK(max_abs_diff(denoise_step(x1, eps, 1, sched).data, x0.data) <= 1e-6);
    }
    const DiffusionSchedule flat({1.0, 1.0, 1.0});
    const LatentImage x{Tensor::from({1, 1, 2}, {0.3, -2.0}), 1};
    CHECK(denoise_step(x, Tensor::zeros({1, 1, 2}), 2, flat).data == x.data);
    CHECK_THROWS_AS(denoise_step(x, Tensor::zeros({1, 1, 2}), 0, flat), RangeError);
}

TEST_CASE("toy backend is deterministic per seed") {
    const ToyBackend a = make_toy_backend(42, 3, 4, 4, 8, 2);
    const ToyBackend b = make_toy_backend(42, 3, 4, 4, 8, 2);
    const ToyBackend c = make_toy_backend(43, 3, 4, 4, 8, 2);
    CHECK(parameter_digest(a.parameters()) == parameter_digest(b.parameters()));
    CHECK(parameter_digest(a.parameters()) != parameter_digest(c.parameters()));

    const ConceptToken toks[] = {make_token(a, "v*")};
    const TextEmbedding text = a.encode_prompt("a [v*] chair", toks);
    std::mt19937_64 rng(1);
    const LatentImage x{oracle::random_tensor({3, 4, 4}, rng), 1};
    const Prediction p1 = a.predict_noise(x, text, 12);
    const Prediction p2 = b.predict_noise(x, text, 12);
    CHECK(bit_identical(p1.eps, p2.eps));
    CHECK(bit_identical(p1.attention.maps[0], p2.attention.maps[0]));
}

TEST_CASE("attention maps are softmax outputs with the documented shape") {
    const ToyBackend b = make_toy_backend(5, 3, 4, 4, 4, 2);
    std::mt19937_64 rng(2);
    const LatentImage x{oracle::random_tensor({3, 4, 4}, rng), 1};
    const Prediction p = b.predict_noise(x, b.encode_prompt("red chair", {}), 30);
    REQUIRE(p.attention.maps.size() == 1);
    CHECK(p.attention.maps[0].shape() == Shape{2, 2, 4, 4});
    CHECK(p.attention.layer_tags[0] == LayerTag::Up);
    CHECK(softmax_sum_error(p.attention) <= 1e-5);
    for (double v : p.attention.maps[0].values()) CHECK(v >= 0.0);

    const Prediction single = b.predict_noise(x, b.encode_prompt("chair", {}), 30);
    for (double v : single.attention.maps[0].values()) CHECK(v == 1.0);
    CHECK_THROWS_AS(b.predict_noise(x, b.encode_prompt("chair", {}), 0), RangeError);
    CHECK_THROWS_AS(b.predict_noise(x, b.encode_prompt("chair", {}), 51), RangeError);
}

TEST_CASE("backward matches central finite differences") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const ToyBackend b = make_toy_backend(seed, 3, 4, 5, 6, 2);
        std::mt19937_64 rng(seed * 101);
        const ConceptToken toks[] = {make_token(b, "v*")};
        const TextEmbedding text = b.encode_prompt("a chair with [v*] style", toks);
        const LatentImage x{oracle::random_tensor({3, 4, 5}, rng), 1};
        const int t = 1 + static_cast<int>(rng() % 50);
        const Prediction p = b.predict_noise(x, text, t);
        const Probe probe{oracle::random_tensor(p.eps.shape(), rng), oracle::random_tensor(p.attention.maps[0].shape(), rng)};
        const std::vector<Tensor> gm{probe.map_weights};
        const Gradients g = b.backward(p, &probe.eps_weights, &gm);

        const Tensor fd_x = oracle::central_difference(
            [&](const Tensor& xs) { return probe(b.predict_noise(LatentImage{xs, 1}, text, t)); }, x.data);
        CHECK(oracle::relative_error(g.latent, fd_x) <= 1e-4);

        const Tensor fd_text = oracle::central_difference(
            [&](const Tensor& e) {
                TextEmbedding c = text;
                c.data = e;
                return probe(b.predict_noise(x, c, t));
            },
            text.data);
        CHECK(oracle::relative_error(g.text, fd_text) <= 1e-4);

        for (const char* name : {ToyBackend::kToK, ToyBackend::kToV, ToyBackend::kToQ, ToyBackend::kQueryPos,
                                 ToyBackend::kHeadOut, ToyBackend::kHeadBias, ToyBackend::kToQTime}) {
            const Tensor fd = oracle::central_difference(
                [&](const Tensor& w) {
                    ToyBackend moved = b;
                    moved.mutable_parameters().at(name) = w;
                    return probe(moved.predict_noise(x, text, t));
                },
                b.parameters().at(name));
            INFO(name);
            CHECK(oracle::relative_error(g.params.at(name), fd) <= 1e-4);
        }

        const Tensor gv = token_gradient(text, g.text, "v*");
        for (std::size_t d = 0; d < gv.size(); ++d) CHECK(gv[d] == g.text.at(3, d));
    }
}

TEST_CASE("trainable parameter selection") {
    const ToyBackend b = make_toy_backend(1, 3, 4, 4, 8, 2);
    const auto kv = b.trainable_params(TrainableSelector::CrossAttentionKV);
    CHECK(kv == std::vector<std::string>{ToyBackend::kToK, ToyBackend::kToV});
    CHECK(b.trainable_params(TrainableSelector::FreezeAll).empty());
    BackendDescriptor d = b.descriptor();
    CHECK(d.kind == BackendKind::Toy);
    CHECK(d.attention_resolutions.size() == 1);
}

TEST_CASE("toy parameters round-trip through the flat file format") {
    const auto dir = oracle::temp_dir("toyparams");
    ToyBackend b = make_toy_backend(9, 3, 6, 5, 8, 2);
    b.mutable_parameters().at(ToyBackend::kToK)[3] = 0.125;
    save_toy_params(b, dir / "p.bin", dir / "p.json");
    const ToyBackend back = load_toy_params(dir / "p.bin", dir / "p.json");
    CHECK(back.config() == b.config());
    CHECK(parameter_digest(back.parameters()) == parameter_digest(b.parameters()));
    std::filesystem::resize_file(dir / "p.bin", 64);
    CHECK_THROWS_AS(load_toy_params(dir / "p.bin", dir / "p.json"), FormatError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("planted attention concentrates a token on its region") {
    ToyBackend b = make_toy_backend(4, 3, 8, 8, 16, 2);
    const ConceptToken w{"w*", b.word_embedding("pattern"), "pattern"};
    Tensor region({8, 8});
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 4; j < 8; ++j) region.at(i, j) = 1.0;
    std::vector<Tensor> others;
    for (const char* word : {"a", "region", "of", "an", "chair"}) others.push_back(b.word_embedding(word));
    const ConceptToken toks[] = {w};
    const TextEmbedding c = b.encode_prompt("a [w*] region of an chair", toks);
    const ToyBackend base = b;
    b.plant_attention(BinaryMask(region, Resolution::Latent), w.embedding, 8.0, others);
    std::mt19937_64 rng(8);
    const Prediction p = b.predict_noise(LatentImage{oracle::random_tensor({3, 8, 8}, rng, 0, 1), 1}, c, 10);
    const Tensor map = aggregate_token_map(p.attention, 1);
    double in = 0, out = 0;
    for (std::size_t n = 0; n < 64; ++n) (region[n] ? in : out) += map[n];
    CHECK(in / 16.0 > 0.9);
    CHECK(out / 48.0 < 0.3);

    // Logit differences between the other tokens are untouched, so their
    // relative attention outside the planted token is unchanged everywhere.
    const Prediction q = base.predict_noise(LatentImage{Tensor({3, 8, 8}, 0.5), 1}, c, 10);
    const Prediction r = b.predict_noise(LatentImage{Tensor({3, 8, 8}, 0.5), 1}, c, 10);
    const Tensor& mq = q.attention.maps[0];
    const Tensor& mr = r.attention.maps[0];
    for (std::size_t n = 0; n < 64; ++n) {
        const double ratio_q = mq[0 * 64 + n] / mq[2 * 64 + n];
        const double ratio_r = mr[0 * 64 + n] / mr[2 * 64 + n];
        CHECK(ratio_r == doctest::Approx(ratio_q).epsilon(1e-9));
    }
}
