// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "app.hpp"
#include "config.hpp"
#include "handles.hpp"
#include "runner.hpp"

#include "doctest.h"

#include <chrono>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <unistd.h>

namespace fs = std::filesystem;
using namespace incontext::cli;

namespace {

struct Workspace {
    fs::path root;

    explicit Workspace(const std::string& name)
        : root(fs::temp_directory_path() / ("incontext_cli_" + name + "_" + std::to_string(::getpid()))) {
        fs::remove_all(root);
        fs::create_directories(root);
        write_image("a.png", 1);
        write_image("b.png", 2);
        write_image("c.png", 3);
        std::vector<unsigned char> m(16 * 16, 0);
        for (int y = 4; y < 12; ++y)
            for (int x = 3; x < 11; ++x) m[y * 16 + x] = 1;
        ic_mask* mask = nullptr;
        check(ic_mask_create(16, 16, m.data(), &mask));
        const Mask own(mask);
        check(ic_mask_save(own.get(), path("m.png").c_str()));
    }
    ~Workspace() {
        std::error_code ec;
        fs::remove_all(root, ec);
    }

    std::string path(const std::string& name) const { return (root / name).string(); }

    void write_image(const std::string& name, unsigned seed) const {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> px(3 * 16 * 16);
        for (double& v : px) v = u(rng);
        ic_image* img = nullptr;
        check(ic_image_create(16, 16, px.data(), &img));
        const Image own(img);
        check(ic_image_save(own.get(), path(name).c_str()));
    }
};

struct Result {
    int code;
    std::string out, err;
};

Result cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::set<std::string> listing(const fs::path& dir) {
    std::set<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) out.insert(fs::relative(e.path(), dir).string());
    return out;
}

std::vector<std::string> learn_args(const Workspace& w, const std::string& outdir) {
    return {"learn", "--input.image=" + w.path("a.png"), "--input.mask=" + w.path("m.png"), "--object_class=chair",
            "--steps=40", "--outdir", w.path(outdir)};
}

}  // namespace

TEST_CASE("materialized defaults carry the published constants") {
    const RunConfig cfg = default_config(Command::Learn);
    const Json& v = cfg.values;
    CHECK(v["train"]["steps"] == 500);
    CHECK(v["train"]["learning_rate"].get<double>() == 1e-5);
    CHECK(v["train"]["alpha"].get<double>() == 0.5);
    CHECK(v["train"]["lambda_att"].get<double>() == 0.5);
    CHECK(v["train"]["lambda_roi"].get<double>() == 0.5);
    CHECK(v["backend"]["timesteps"] == 50);
    CHECK(v["generate"]["t_s"] == 5);
    CHECK(v["edit"]["t_start"] == 10);
    CHECK(v["edit"]["prompt"] == "a photo of an {OBJECT}, with [v*] style");

    const Result r = cli({"learn", "--print-config"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("train.steps = 500\n") != std::string::npos);
    CHECK(r.out.find("train.learning_rate = 1e-05\n") != std::string::npos);
}

TEST_CASE("flags override the config file") {
    Workspace w("precedence");
    std::ofstream(w.path("run.cfg")) << "# edit settings\nedit.eta = 0.05\nt_start = 12\n";

    const Result r = cli({"edit", "--config", w.path("run.cfg"), "--eta=0.1", "--print-config"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("edit.eta = 0.1\n") != std::string::npos);
    CHECK(r.out.find("edit.t_start = 12\n") != std::string::npos);

    RunConfig cfg = default_config(Command::Edit);
    apply_config_file(cfg, w.path("run.cfg"));
    CHECK(cfg.values["edit"]["eta"].get<double>() == 0.05);
    set_value(cfg, "eta", "0.1");
    CHECK(cfg.values["edit"]["eta"].get<double>() == 0.1);
    set_value(cfg, "edit.eta", "0.2");
    CHECK(cfg.values["edit"]["eta"].get<double>() == 0.2);

    const Result spaced = cli({"edit", "--config", w.path("run.cfg"), "--eta", "0.3", "--print-config"});
    REQUIRE(spaced.code == 0);
    CHECK(spaced.out.find("edit.eta = 0.3\n") != std::string::npos);
}

TEST_CASE("bare keys resolve within the command's sections") {
    CHECK(resolve_key(Command::Learn, "steps") == "train.steps");
    CHECK(resolve_key(Command::Learn, "p_hflip") == "train.augmentation.p_hflip");
    CHECK(resolve_key(Command::MatchMask, "steps") == "region.steps");
    CHECK(resolve_key(Command::MatchMask, "threshold") == "extract.threshold");
    CHECK(resolve_key(Command::Generate, "t_s") == "generate.t_s");
    CHECK(resolve_key(Command::Edit, "seed") == "seed");
    CHECK(resolve_key(Command::Edit, "image") == "input.image");
}

TEST_CASE("unknown keys and bad values are usage errors naming the key") {
    Workspace w("unknown");
    const Result r = cli({"learn", "--lamda_att=0.3", "--print-config"});
    CHECK(r.code == 1);
    CHECK(r.err.find("lamda_att") != std::string::npos);

    std::ofstream(w.path("bad.cfg")) << "train.steps = 10\ntrain.lamda_att = 0.3\n";
    const Result f = cli({"learn", "--config", w.path("bad.cfg"), "--print-config"});
    CHECK(f.code == 1);
    CHECK(f.err.find("lamda_att") != std::string::npos);
    CHECK(f.err.find(":2") != std::string::npos);

    RunConfig cfg = default_config(Command::Learn);
    CHECK_THROWS_AS(set_value(cfg, "steps", "many"), ConfigError);
    CHECK_THROWS_AS(set_value(cfg, "steps", "-3"), ConfigError);
    CHECK_THROWS_AS(set_value(cfg, "learning_rate", "fast"), ConfigError);
    CHECK_THROWS_AS(set_value(cfg, "largest_component", "2"), ConfigError);
    CHECK_THROWS_AS(set_value(cfg, "train", "1"), ConfigError);
    CHECK_THROWS_AS(apply_config_text(cfg, "steps 10\n", "inline"), ConfigError);
    CHECK(cfg == default_config(Command::Learn));

    const Result t = cli({"learn", "--steps=ten", "--print-config"});
    CHECK(t.code == 1);
    CHECK(t.err.find("train.steps") != std::string::npos);
}

TEST_CASE("override tokens") {
    const auto kv = parse_overrides({"--a=1", "--b", "2", "--c=", "--d", "-5"});
    REQUIRE(kv.size() == 4);
    CHECK(kv[0] == std::pair<std::string, std::string>{"a", "1"});
    CHECK(kv[1] == std::pair<std::string, std::string>{"b", "2"});
    CHECK(kv[2] == std::pair<std::string, std::string>{"c", ""});
    CHECK(kv[3] == std::pair<std::string, std::string>{"d", "-5"});
    CHECK_THROWS_AS(parse_overrides({"stray"}), ConfigError);
    CHECK_THROWS_AS(parse_overrides({"--x"}), ConfigError);
    CHECK_THROWS_AS(parse_overrides({"--x", "--y=1"}), ConfigError);
}

TEST_CASE("config text round-trips") {
    RunConfig cfg = default_config(Command::MatchMask);
    set_value(cfg, "object_class", "teapot with spout");
    set_value(cfg, "probe_timesteps", "3,7");
    set_value(cfg, "largest_component", "false");
    set_value(cfg, "seed", "18446744073709551615");
    set_value(cfg, "region.learning_rate", "0.000123456789012345");
    RunConfig back = default_config(Command::MatchMask);
    apply_config_text(back, to_config_text(cfg), "roundtrip");
    CHECK(back == cfg);
}

TEST_CASE("edit without a checkpoint fails before any computation") {
    Workspace w("nockpt");
    const auto t0 = std::chrono::steady_clock::now();
    const Result r = cli({"edit", "--input.image=" + w.path("b.png"), "--input.mask=" + w.path("m.png"),
                          "--object_class=chair", "--outdir", w.path("out")});
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 1.0);
    CHECK(r.code == 1);
    CHECK(r.err.find("input.checkpoint") != std::string::npos);
    CHECK(listing(w.root / "out") == std::set<std::string>{"manifest.json"});
    const Json m = read_manifest(w.root / "out" / "manifest.json");
    CHECK(m["status"] == "failed");
    CHECK(m["error"]["exit_code"] == 1);
    CHECK_FALSE(m.contains("artifacts"));

    const Result missing = cli({"edit", "--input.checkpoint=" + w.path("nope.bin"), "--input.image=" + w.path("b.png"),
                                "--input.mask=" + w.path("m.png"), "--object_class=chair", "--outdir", w.path("out2")});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("nope.bin") != std::string::npos);

    const Result unused = cli({"generate", "--input.checkpoint=" + w.path("a.png"), "--input.image=" + w.path("b.png"),
                               "--object_class=chair", "--outdir", w.path("out3")});
    CHECK(unused.code == 1);
    CHECK(unused.err.find("input.image") != std::string::npos);
}

TEST_CASE("exit codes") {
    Workspace w("exit");
    CHECK(cli({}).code == 1);
    CHECK(cli({"paint"}).code == 1);
    CHECK(cli({"--help"}).code == 0);
    CHECK(cli({"learn", "--help"}).code == 0);
    CHECK(cli({"rerun", w.path("absent.json"), "--outdir", w.path("x")}).code == 1);
    CHECK(cli({"learn", "--config", w.path("absent.cfg")}).code == 1);

    const Result ok = cli(learn_args(w, "learn"));
    CHECK(ok.code == 0);

    const Result busy = cli(learn_args(w, "learn"));
    CHECK(busy.code == 1);
    CHECK(busy.err.find("--force") != std::string::npos);
    CHECK(fs::exists(w.root / "learn" / "checkpoint.bin"));

    const Result bad = cli({"edit", "--input.checkpoint=" + w.path("a.png"), "--input.image=" + w.path("b.png"),
                            "--input.mask=" + w.path("m.png"), "--object_class=chair", "--outdir", w.path("edit")});
    CHECK(bad.code == 2);
    CHECK_FALSE(bad.err.empty());
}

TEST_CASE("runtime failures leave only a failed manifest") {
    Workspace w("partial");
    REQUIRE(cli(learn_args(w, "learn")).code == 0);

    // Geometry mismatch surfaces inside the pipeline, after staging has begun.
    const Result r = cli({"edit", "--input.checkpoint=" + w.path("learn/checkpoint.bin"),
                          "--input.image=" + w.path("b.png"), "--input.mask=" + w.path("m.png"), "--object_class=chair",
                          "--backend.width=8", "--outdir", w.path("edit")});
    CHECK(r.code == 2);
    CHECK(listing(w.root / "edit") == std::set<std::string>{"manifest.json"});
    CHECK(read_manifest(w.root / "edit" / "manifest.json")["status"] == "failed");

    // --force over a previous success still leaves nothing but the failure record.
    const Result forced = cli({"edit", "--input.checkpoint=" + w.path("a.png"), "--input.image=" + w.path("b.png"),
                               "--input.mask=" + w.path("m.png"), "--object_class=chair", "--force", "--outdir",
                               w.path("learn")});
    CHECK(forced.code == 2);
    CHECK(listing(w.root / "learn") == std::set<std::string>{"manifest.json"});

    for (const auto& e : fs::directory_iterator(w.root))
        CHECK(e.path().filename().string().find(".staging-") == std::string::npos);
}

TEST_CASE("learn, edit and generate chain with manifests") {
    Workspace w("chain");
    const auto t0 = std::chrono::steady_clock::now();
    REQUIRE(cli({"learn", "--input.image=" + w.path("a.png"), "--input.mask=" + w.path("m.png"), "--object_class=chair",
                 "--outdir", w.path("learn")})
                .code == 0);
    const Result e = cli({"edit", "--input.checkpoint=" + w.path("learn/checkpoint.bin"),
                          "--input.image=" + w.path("b.png"), "--input.mask=" + w.path("m.png"), "--object_class=chair",
                          "--outdir", w.path("edit")});
    REQUIRE(e.code == 0);
    REQUIRE(cli({"generate", "--input.checkpoint=" + w.path("learn/checkpoint.bin"), "--object_class=chair", "--outdir",
                 w.path("gen")})
                .code == 0);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 60.0);

    CHECK(listing(w.root / "learn") ==
          std::set<std::string>{"manifest.json", "checkpoint.bin", "images", "masks", "traces", "traces/loss.csv"});
    CHECK(fs::exists(w.root / "edit" / "images" / "edited.png"));
    CHECK(fs::exists(w.root / "edit" / "traces" / "edit.json"));
    CHECK(fs::exists(w.root / "gen" / "images" / "generated.png"));

    const std::string csv = read_file(w.root / "learn" / "traces" / "loss.csv");
    CHECK(csv.rfind("step,l_con,l_att,l_roi,l_tot,t\n", 0) == 0);

    const Json m = read_manifest(w.root / "edit" / "manifest.json");
    CHECK(m["status"] == "ok");
    CHECK(m["tool"]["version"] == ic_version());
    CHECK(m["config"]["backend"]["height"] == 16);
    CHECK(m["config"]["backend"]["width"] == 16);
    CHECK(m["traces"]["prompt"] == "a photo of an chair, with [v*] style");
    CHECK(m["wall_clock_seconds"].get<double>() >= 0.0);
    CHECK(m["seeds"]["derived"]["edit"] == ic_derive_seed(0, "edit"));
    char* hex = nullptr;
    check(ic_file_digest(w.path("b.png").c_str(), &hex));
    CHECK(m["inputs"]["image"]["sha256"] == take_string(hex));

    // The resolved config in a manifest parses back to the same RunConfig.
    const RunConfig back = config_from_manifest(m);
    CHECK(back.command == Command::Edit);
    CHECK(back.values == m["config"]);
    RunConfig text = default_config(Command::Edit);
    apply_config_text(text, to_config_text(back), "manifest");
    CHECK(text == back);
}

TEST_CASE("manifest reader is strict") {
    RunConfig cfg = default_config(Command::Generate);
    Json m{{"command", "generate"}, {"config", cfg.values}};
    CHECK(config_from_manifest(m) == cfg);
    Json extra = m;
    extra["config"]["generate"]["lamda"] = 1;
    CHECK_THROWS_AS(config_from_manifest(extra), ConfigError);
    Json typed = m;
    typed["config"]["generate"]["t_s"] = "five";
    CHECK_THROWS_AS(config_from_manifest(typed), ConfigError);
    Json cmd = m;
    cmd["command"] = "paint";
    CHECK_THROWS_AS(config_from_manifest(cmd), ConfigError);
}

TEST_CASE("every command reruns byte-identically from its manifest") {
    Workspace w("rerun");
    const std::string ckpt = w.path("learn/checkpoint.bin");
    REQUIRE(cli(learn_args(w, "learn")).code == 0);
    REQUIRE(cli({"edit", "--input.checkpoint=" + ckpt, "--input.image=" + w.path("b.png"),
                 "--input.mask=" + w.path("m.png"), "--object_class=chair", "--outdir", w.path("edit")})
                .code == 0);
    REQUIRE(cli({"generate", "--input.checkpoint=" + ckpt, "--object_class=chair", "--outdir", w.path("generate")})
                .code == 0);
    REQUIRE(cli({"match-mask", "--input.checkpoint=" + ckpt, "--input.image=" + w.path("a.png"),
                 "--input.mask=" + w.path("m.png"), "--input.target_image=" + w.path("c.png"), "--object_class=chair",
                 "--steps=30", "--learning_rate=0.05", "--outdir", w.path("match-mask")})
                .code == 0);
    REQUIRE(cli({"discover-mask", "--input.images=" + w.path("a.png") + "," + w.path("b.png") + "," + w.path("c.png"),
                 "--object_class=chair", "--steps=30", "--outdir", w.path("discover-mask")})
                .code == 0);
    CHECK(fs::exists(w.root / "match-mask" / "masks" / "target.png"));
    CHECK(fs::exists(w.root / "discover-mask" / "masks" / "source_02.png"));

    for (const std::string name : {"learn", "edit", "generate", "match-mask", "discover-mask"}) {
        CAPTURE(name);
        const fs::path first = w.root / name;
        const fs::path again = w.root / (name + "-again");
        REQUIRE(cli({"rerun", (first / "manifest.json").string(), "--outdir", again.string()}).code == 0);
        REQUIRE(listing(first) == listing(again));
        for (const std::string& f : listing(first)) {
            if (f == "manifest.json" || fs::is_directory(first / f)) continue;
            CAPTURE(f);
            CHECK(read_file(first / f) == read_file(again / f));
        }
        Json a = read_manifest(first / "manifest.json"), b = read_manifest(again / "manifest.json");
        CHECK(a["inputs"] == b["inputs"]);
        CHECK(a["traces"] == b["traces"]);
        a["config"]["output"] = b["config"]["output"];
        CHECK(a["config"] == b["config"]);
    }
}

TEST_CASE("seed fan-out") {
    const Json a = derived_seeds(7), b = derived_seeds(7), c = derived_seeds(8);
    CHECK(a == b);
    CHECK(a != c);
    std::set<std::uint64_t> distinct;
    for (const auto& [k, v] : a.items()) distinct.insert(v.get<std::uint64_t>());
    CHECK(distinct.size() == a.size());

    RunConfig cfg = default_config(Command::Learn);
    set_value(cfg, "seed", "7");
    CHECK(library_section(cfg, "train")["seed"] == a["train"]);
    CHECK(library_section(cfg, "train")["seed"] == ic_derive_seed(7, "train"));
}
