// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails or overruns its time budget.

#include "incontext/checkpoint.hpp"
#include "incontext/concept_learning.hpp"
#include "incontext/error.hpp"
#include "incontext/image_io.hpp"
#include "incontext/losses.hpp"
#include "incontext/masking.hpp"
#include "incontext/roi_matching.hpp"
#include "incontext/transfer.hpp"

#include "app.hpp"
#include "config.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace incontext;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Verdict()> run;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------- 1

CrossAttentionRecord random_record(std::size_t heads, std::size_t tokens, std::size_t h, std::size_t w,
                                   std::mt19937_64& rng) {
    Tensor maps({heads, tokens, h, w});
    std::normal_distribution<double> d;
    for (std::size_t a = 0; a < heads; ++a)
        for (std::size_t n = 0; n < h * w; ++n) {
            std::vector<double> e(tokens);
            double z = 0.0;
            for (double& v : e) z += (v = std::exp(d(rng)));
            for (std::size_t l = 0; l < tokens; ++l) maps[(a * tokens + l) * h * w + n] = e[l] / z;
        }
    return CrossAttentionRecord{{maps}, {LayerTag::Up}};
}

Verdict loss_oracles() {
    std::mt19937_64 rng(2026);
    double worst = 0.0;
    int cases = 0;
    auto note = [&](double got, double want) {
        worst = std::max(worst, std::abs(got - want));
        ++cases;
    };

    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t h = 2 + rng() % 5, w = 2 + rng() % 5, L = 2 + rng() % 4, heads = 1 + rng() % 3;
        const CrossAttentionRecord r = random_record(heads, L, h, w, rng);
        const std::size_t pos = rng() % L;
        const Tensor m = oracle::random_binary(h, w, rng);
        double brute = 0.0;
        for (std::size_t n = 0; n < h * w; ++n) {
            double avg = 0.0;
            for (std::size_t a = 0; a < heads; ++a) avg += r.maps[0][(a * L + pos) * h * w + n];
            avg /= static_cast<double>(heads);
            brute += (avg - m[n]) * (avg - m[n]);
        }
        note(attention_loss(r, pos, BinaryMask(m, Resolution::Image)), brute / static_cast<double>(h * w));
    }

    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t c = 1 + rng() % 4, h = 2 + rng() % 5, w = 2 + rng() % 5;
        const Tensor a = oracle::random_tensor({c, h, w}, rng), b = oracle::random_tensor({c, h, w}, rng);
        const double alpha = std::uniform_real_distribution<double>(0, 1)(rng);
        const Tensor m = oracle::random_binary(h, w, rng);
        double brute = 0.0;
        for (std::size_t k = 0; k < c; ++k)
            for (std::size_t n = 0; n < h * w; ++n) {
                const double s = alpha + (1.0 - alpha) * m[n];
                const double r = s * (a[k * h * w + n] - b[k * h * w + n]);
                brute += r * r;
            }
        note(context_loss(a, b, soften(BinaryMask(m, Resolution::Latent), alpha)), brute / static_cast<double>(c * h * w));
    }

    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t h = 3 + rng() % 3, w = 3 + rng() % 3;
        const ToyBackend b = make_toy_backend(trial + 1, 3, h, w, 8, 2);
        const ConceptToken v{"v*", b.word_embedding("style"), "style"};
        const ConceptToken toks[] = {v};
        const TextEmbedding c = b.encode_prompt("A photo of [v*]", toks);
        const LatentImage x{oracle::random_tensor({3, h, w}, rng), 1};
        const Tensor eps = oracle::random_tensor({3, h, w}, rng);
        const Tensor m = oracle::random_binary(h, w, rng);
        const int t = 1 + static_cast<int>(rng() % 50);
        Tensor masked(x.data.shape());
        for (std::size_t k = 0; k < 3; ++k)
            for (std::size_t n = 0; n < h * w; ++n) masked[k * h * w + n] = m[n] * x.data[k * h * w + n];
        const Tensor pred = b.predict_noise(LatentImage{masked, 1}, c, t).eps;
        double brute = 0.0;
        for (std::size_t k = 0; k < pred.size(); ++k) brute += (pred[k] - eps[k]) * (pred[k] - eps[k]);
        note(roi_loss(b, x, BinaryMask(m, Resolution::Latent), c, t, eps), brute / static_cast<double>(pred.size()));
    }

    std::uniform_real_distribution<double> u(0, 5);
    for (int trial = 0; trial < 25; ++trial) {
        const double c = u(rng), a = u(rng), r = u(rng), la = u(rng), lr = u(rng);
        note(total_loss(c, a, r, la, lr), c + la * a + lr * r);
    }
    return {worst <= 1e-10, std::to_string(cases) + " cases, max dev " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------- 2

bool soften_matches(const Tensor& m, double alpha) {
    const SoftMask s = soften(BinaryMask(m, Resolution::Latent), alpha);
    if (s.data.shape() != m.shape() || s.alpha != alpha) return false;
    for (std::size_t k = 0; k < m.size(); ++k) {
        const double want = alpha + (1.0 - alpha) * m[k];
        if (s.data[k] != want) return false;
        if (s.data[k] != alpha && s.data[k] != 1.0) return false;
    }
    return true;
}

Verdict soft_mask_law() {
    const double alphas[] = {0.0, 0.25, 0.5, 1.0};
    std::mt19937_64 rng(8);
    std::size_t masks = 0;
    bool ok = true;
    for (std::size_t h = 1; h <= 8 && ok; ++h)
        for (std::size_t w = 1; w <= 8 && ok; ++w) {
            const std::size_t n = h * w;
            std::vector<Tensor> patterns;
            if (n <= 16) {
                for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
                    Tensor m({h, w});
                    for (std::size_t k = 0; k < n; ++k) m[k] = (bits >> k) & 1 ? 1.0 : 0.0;
                    patterns.push_back(std::move(m));
                }
            } else {
                patterns.push_back(Tensor::zeros({h, w}));
                patterns.push_back(Tensor::ones({h, w}));
                for (std::size_t k = 0; k < n; ++k) {
                    Tensor one({h, w});
                    one[k] = 1.0;
                    patterns.push_back(one);
                    Tensor hole = Tensor::ones({h, w});
                    hole[k] = 0.0;
                    patterns.push_back(hole);
                }
                for (int r = 0; r < 512; ++r) patterns.push_back(oracle::random_binary(h, w, rng));
            }
            for (const Tensor& m : patterns) {
                for (double a : alphas) ok = ok && soften_matches(m, a);
                ++masks;
            }
        }
    return {ok, std::to_string(masks) + " masks x 4 alphas"};
}

// ---------------------------------------------------------------- 3

Verdict scheduler_identity() {
    std::mt19937_64 rng(31);
    double worst = 0.0;
    bool identity = true;
    for (int trial = 0; trial < 10; ++trial) {
        const int T = 10 + static_cast<int>(rng() % 41);
        const DiffusionSchedule sched = trial % 2 ? DiffusionSchedule::stable_diffusion(T)
                                                  : DiffusionSchedule::linear(T, 0.01 + 0.05 * static_cast<double>(rng() % 6));
        const std::size_t c = 1 + rng() % 4, h = 2 + rng() % 6, w = 2 + rng() % 6;
        const LatentImage x0{oracle::random_tensor({c, h, w}, rng), 1};
        const Tensor eps = randn({c, h, w}, rng);
        LatentImage x = add_noise(x0, eps, T, sched);
        for (int t = T; t >= 1; --t) x = denoise_step(x, eps, t, sched);
        worst = std::max(worst, max_abs_diff(x.data, x0.data));
        identity = identity && bit_identical(add_noise(x0, eps, 0, sched).data, x0.data);
    }
    return {worst <= 1e-4 && identity,
            "max reconstruction error " + fmt("%.2e", worst) + (identity ? ", t=0 identity exact" : ", t=0 NOT identity")};
}

// ---------------------------------------------------------------- 4

Verdict gradient_checks() {
    double worst_guidance = 0.0, worst_token = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const ToyBackend b = make_toy_backend(seed, 3, 6, 6, 16, 2);
        const ConceptToken v{"v*", b.word_embedding("motif"), "motif"};
        const ConceptToken tokens[] = {v};
        const TextEmbedding c = b.encode_prompt("a photo of [v*]", tokens);
        std::mt19937_64 rng(seed);
        const BinaryMask mask(oracle::random_binary(6, 6, rng), Resolution::Image);
        const LatentImage x{oracle::random_tensor({3, 6, 6}, rng), 1};
        const int t = 3 + static_cast<int>(seed) * 8;
        const GuidanceEval ev = guidance_objective(b, x, c, "v*", t, mask, true);
        const Tensor fd = oracle::central_difference(
            [&](const Tensor& p) { return guidance_objective(b, LatentImage{p, 1}, c, "v*", t, mask, false).objective; },
            x.data);
        worst_guidance = std::max(worst_guidance, oracle::relative_error(ev.grad, fd));
    }
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const ToyBackend b = make_toy_backend(seed, 3, 6, 6, 8, 2);
        const SourceSample s = fixtures::synthetic_sample(6, 6, 1);
        const TrainingConfig cfg;
        std::mt19937_64 rng(seed);
        const int t = 1 + static_cast<int>(rng() % 50);
        const Tensor eps = randn({3, 6, 6}, rng);
        const ConceptToken v{"v*", b.word_embedding("style"), "style"};
        const LossEvaluation ev = evaluate_concept_losses(b, v, s, ZoomTag::None, cfg, t, eps, true);
        const Tensor fd = oracle::central_difference(
            [&](const Tensor& e) {
                ConceptToken moved = v;
                moved.embedding = e;
                return evaluate_concept_losses(b, moved, s, ZoomTag::None, cfg, t, eps, false).losses.l_tot;
            },
            v.embedding);
        worst_token = std::max(worst_token, oracle::relative_error(ev.grad_token, fd));
    }
    return {worst_guidance <= 1e-4 && worst_token <= 1e-4,
            "guidance rel err " + fmt("%.2e", worst_guidance) + ", d l_tot/d v* rel err " + fmt("%.2e", worst_token)};
}

// ---------------------------------------------------------------- 5

Verdict blended_preservation() {
    int preserved = 0, identity = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const fixtures::EditScene e = fixtures::edit_scene(seed);
        EditConfig cfg;
        cfg.seed = seed;
        cfg.eta = seed % 2 ? 0.05 : 0.1;
        cfg.blend_mode = seed % 3 ? BlendMode::NoiseMatched : BlendMode::FixedStart;
        const EditResult r = edit_image(e.scene.backend, e.token, e.scene.image, e.scene.region, e.prompt, cfg);
        const Tensor& ml = e.scene.region.data();
        bool same = true;
        for (std::size_t k = 0; k < r.latent.data.size(); ++k)
            if (ml[k % ml.size()] == 0.0 && r.latent.data[k] != r.x_tg.data[k]) same = false;
        preserved += same;

        const BinaryMask empty = BinaryMask::zeros(16, 16, Resolution::Image);
        const EditResult z = edit_image(e.scene.backend, e.token, e.scene.image, empty, e.prompt, cfg);
        identity += z.image == e.scene.image;
    }
    return {preserved == 10 && identity == 10,
            std::to_string(preserved) + "/10 preserved outside mask, " + std::to_string(identity) + "/10 empty-mask identity"};
}

// ---------------------------------------------------------------- 6

Verdict guidance_monotonicity() {
    int ok = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const fixtures::EditScene e = fixtures::edit_scene(seed);
        double previous = INFINITY;
        bool mono = true;
        for (double eta : {0.0, 0.01, 0.1}) {
            EditConfig cfg;
            cfg.eta = eta;
            cfg.seed = seed;
            const double obj = edit_image(e.scene.backend, e.token, e.scene.image, e.scene.region, e.prompt, cfg).final_objective;
            mono = mono && obj <= previous;
            previous = obj;
            if (seed == 1) detail += fmt("%.4g ", obj);
        }
        ok += mono;
    }
    return {ok == 5, std::to_string(ok) + "/5 scenes nonincreasing (seed 1: " + detail + ")"};
}

// ---------------------------------------------------------------- 7

Verdict training_smoke() {
    const ToyBackend b = make_toy_backend(1, 3, 16, 16, 16, 2);
    const std::string base_digest = parameter_digest(b.parameters());
    const SourceSample s = fixtures::synthetic_sample();
    TrainingConfig cfg;
    cfg.steps = 200;
    cfg.learning_rate = 5e-3;
    cfg.seed = 1;
    const auto probes = make_loss_probes(b, 16, 99);
    const ConceptToken init{"v*", b.word_embedding("style"), "style"};
    const double before = mean_probe_losses(b, init, s, cfg, probes).l_tot;
    const TrainingResult r = train_concept(b, s, cfg);
    const auto tuned = apply_checkpoint(b, r.checkpoint);
    const double after = mean_probe_losses(*tuned, r.checkpoint.token, s, cfg, probes).l_tot;

    const std::vector<std::string> kv = b.trainable_params(TrainableSelector::CrossAttentionKV);
    const bool frozen = parameter_digest(b.parameters()) == base_digest &&
                        parameter_digest(tuned->parameters(), kv) == parameter_digest(b.parameters(), kv);
    return {after <= 0.5 * before && frozen && r.trace.size() == 200,
            "l_tot " + fmt("%.4g", before) + " -> " + fmt("%.4g", after) + fmt(" (%.1f%% reduction)", 100.0 * (1.0 - after / before)) +
                (frozen ? ", frozen digests unchanged" : ", frozen digests CHANGED")};
}

// ---------------------------------------------------------------- 8

Verdict roi_recovery() {
    double worst_target = 1.0, worst_source = 1.0;
    bool identity = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const fixtures::PlantedScene s = fixtures::planted_scene(seed);

        const Tensor w_emb = s.backend.word_embedding("pattern");
        ToyBackend bt = s.backend;
        bt.plant_attention(fixtures::on_latent(s.region), w_emb, 6.0,
                           fixtures::word_embeddings(bt, {"a", "region", "of", "an", "chair"}));
        const RegionToken target{{"w*", w_emb, "pattern"}, RegionPurpose::TargetMatching, "chair"};
        worst_target = std::min(worst_target, iou(extract_target_mask(bt, target, s.image, {}).mask, s.region));

        const Tensor s_emb = s.backend.word_embedding("motif");
        ToyBackend bs = s.backend;
        bs.plant_attention(fixtures::on_latent(s.region), s_emb, 6.0,
                           fixtures::word_embeddings(bs, {"an", "chair", "with", "style"}));
        const RegionToken source{{"w*", s_emb, "motif"}, RegionPurpose::SourceDiscovery, "chair"};
        worst_source = std::min(worst_source, iou(extract_source_mask(bs, source, s.image, {}).mask, s.region));

        const ConceptToken v{"v*", randn({s.backend.descriptor().embed_dim}, seed), "pattern"};
        RegionTrainingConfig zero;
        zero.steps = 0;
        zero.seed = seed;
        const RegionTrainingResult r = learn_target_matcher(s.backend, v, SourceSample{s.image, s.region, "chair"}, zero);
        identity = identity && bit_identical(r.region.token.embedding, v.embedding);
    }
    return {worst_target >= 0.9 && worst_source >= 0.9 && identity,
            "min IoU target " + fmt("%.3f", worst_target) + ", source " + fmt("%.3f", worst_source) +
                (identity ? ", steps=0 gives w* = v*" : ", steps=0 changed w*")};
}

// ---------------------------------------------------------------- 9

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    return cli::run_cli(args, out, err);
}

Verdict reproducibility() {
    const fs::path root = oracle::temp_dir("acceptance_repro");
    fs::remove_all(root);
    fs::create_directories(root);
    auto at = [&](const std::string& name) { return (root / name).string(); };

    const fixtures::PlantedScene a = fixtures::planted_scene(1), b = fixtures::planted_scene(2), c = fixtures::planted_scene(3);
    save_image(at("a.png"), a.image);
    save_image(at("b.png"), b.image);
    save_image(at("c.png"), c.image);
    save_mask(at("m.png"), a.region);

    const std::string ckpt = at("learn/checkpoint.bin");
    const std::vector<std::vector<std::string>> runs = {
        {"learn", "--input.image=" + at("a.png"), "--input.mask=" + at("m.png"), "--object_class=chair", "--steps=60",
         "--seed=11", "--outdir", at("learn")},
        {"edit", "--input.checkpoint=" + ckpt, "--input.image=" + at("b.png"), "--input.mask=" + at("m.png"),
         "--object_class=chair", "--seed=12", "--outdir", at("edit")},
        {"generate", "--input.checkpoint=" + ckpt, "--object_class=chair", "--seed=13", "--outdir", at("generate")},
        {"match-mask", "--input.checkpoint=" + ckpt, "--input.image=" + at("a.png"), "--input.mask=" + at("m.png"),
         "--input.target_image=" + at("c.png"), "--object_class=chair", "--steps=40", "--learning_rate=0.05",
         "--outdir", at("match-mask")},
        {"discover-mask", "--input.images=" + at("a.png") + "," + at("b.png") + "," + at("c.png"),
         "--object_class=chair", "--steps=40", "--outdir", at("discover-mask")},
    };
    int identical = 0, files = 0;
    std::string failures;
    for (const auto& args : runs) {
        const std::string name = args[0];
        const fs::path first = root / name, again = root / (name + "-rerun");
        if (cli(args) != 0 || cli({"rerun", (first / "manifest.json").string(), "--outdir", again.string()}) != 0) {
            failures += " " + name + "(run failed)";
            continue;
        }
        bool same = true;
        std::set<std::string> seen;
        for (const auto& e : fs::recursive_directory_iterator(first)) {
            const fs::path rel = fs::relative(e.path(), first);
            seen.insert(rel.string());
            if (!e.is_regular_file() || rel == "manifest.json") continue;
            ++files;
            if (!fs::exists(again / rel) || slurp(e.path()) != slurp(again / rel)) same = false;
        }
        std::set<std::string> seen_again;
        for (const auto& e : fs::recursive_directory_iterator(again)) seen_again.insert(fs::relative(e.path(), again).string());
        same = same && seen == seen_again;
        identical += same;
        if (!same) failures += " " + name;
    }

    const ConceptCheckpoint loaded = load_checkpoint(ckpt);
    save_checkpoint(loaded, at("resaved.bin"));
    const ConceptCheckpoint reloaded = load_checkpoint(at("resaved.bin"));
    bool lossless = slurp(ckpt) == slurp(at("resaved.bin")) && bit_identical(loaded.token.embedding, reloaded.token.embedding) &&
                    loaded.config == reloaded.config && loaded.base_digest == reloaded.base_digest &&
                    loaded.source_digest == reloaded.source_digest;
    for (const auto& [name, delta] : loaded.ca_weight_deltas)
        lossless = lossless && reloaded.ca_weight_deltas.count(name) && bit_identical(delta, reloaded.ca_weight_deltas.at(name));
    fs::remove_all(root);
    return {identical == 5 && lossless, std::to_string(identical) + "/5 commands byte-identical over " + std::to_string(files) +
                                            " artifacts" + failures + (lossless ? ", checkpoint round-trip lossless" : ", checkpoint round-trip LOSSY")};
}

// ---------------------------------------------------------------- 10

Verdict default_constants() {
    std::vector<std::string> bad;
    auto expect = [&](bool cond, const char* what) {
        if (!cond) bad.push_back(what);
    };
    const TrainingConfig train;
    expect(train.alpha == 0.5, "alpha");
    expect(train.lambda_att == 0.5, "lambda_att");
    expect(train.lambda_roi == 0.5, "lambda_roi");
    expect(train.steps == 500, "steps");
    expect(train.learning_rate == 1e-5, "learning_rate");
    expect(ToyConfig{}.timesteps == 50, "T");
    expect(DiffusionSchedule::stable_diffusion(50).T() == 50, "schedule T");
    expect(GenerationConfig{}.t_s == 5, "t_s");
    expect(EditConfig{}.t_start == 10, "t_start");
    for (int t = 0; t <= 50; ++t) expect(t_start_warning(t).has_value() == (t < 5 || t > 15), "t_start window");

    const cli::Json v = cli::default_config(cli::Command::Learn).values;
    expect(v["train"]["alpha"] == 0.5, "cli alpha");
    expect(v["train"]["lambda_att"] == 0.5, "cli lambda_att");
    expect(v["train"]["lambda_roi"] == 0.5, "cli lambda_roi");
    expect(v["train"]["steps"] == 500, "cli steps");
    expect(v["train"]["learning_rate"] == 1e-5, "cli learning_rate");
    expect(v["backend"]["timesteps"] == 50, "cli T");
    expect(v["generate"]["t_s"] == 5, "cli t_s");
    expect(v["edit"]["t_start"] == 10, "cli t_start");

    std::string detail = "alpha .5, lambda_att .5, lambda_roi .5, steps 500, lr 1e-5, T 50, t_s 5, t_start 10 in [5,15]";
    if (!bad.empty()) {
        detail = "mismatch:";
        for (const auto& b : bad) detail += " " + b;
    }
    return {bad.empty(), detail};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "loss-formula oracles", 5, loss_oracles},
        {2, "soft-mask law", 1, soft_mask_law},
        {3, "scheduler identity", 5, scheduler_identity},
        {4, "gradient checks", 30, gradient_checks},
        {5, "blended-edit preservation", 10, blended_preservation},
        {6, "guidance strength monotonicity", 10, guidance_monotonicity},
        {7, "training smoke", 60, training_smoke},
        {8, "RoI-matching recovery", 60, roi_recovery},
        {9, "reproducibility", 60, reproducibility},
        {10, "default constants", 1, default_constants},
    };
    int failed = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_seconds;
        const bool pass = v.pass && in_time;
        failed += !pass;
        std::printf("%s %2d %-32s %7.3fs / %4.0fs  %s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs, c.budget_seconds,
                    v.detail.c_str(), in_time ? "" : " [over time budget]");
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
