// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "runner.hpp"

#include "handles.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace incontext::cli {
namespace fs = std::filesystem;
namespace {

std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw RunError("cannot write " + tmp.string());
        out << text;
        if (!out.flush()) throw RunError("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string file_digest(const std::string& path) {
    char* hex = nullptr;
    check(ic_file_digest(path.c_str(), &hex));
    return take_string(hex);
}

Image load_image(const std::string& path) {
    ic_image* img = nullptr;
    check(ic_image_load(path.c_str(), &img));
    return Image(img);
}

Mask load_mask(const std::string& path) {
    ic_mask* m = nullptr;
    check(ic_mask_load(path.c_str(), &m));
    return Mask(m);
}

Checkpoint load_checkpoint(const std::string& path) {
    ic_checkpoint* c = nullptr;
    check(ic_checkpoint_load(path.c_str(), &c));
    return Checkpoint(c);
}

Json checkpoint_info(const ic_checkpoint* c) {
    char* text = nullptr;
    check(ic_checkpoint_info(c, &text));
    return Json::parse(take_string(text));
}

Backend make_backend(const RunConfig& cfg) {
    ic_backend* b = nullptr;
    check(ic_backend_create(library_section(cfg, "backend").dump().c_str(), &b));
    return Backend(b);
}

Backend apply(const ic_backend* base, const ic_checkpoint* c) {
    ic_backend* t = nullptr;
    check(ic_checkpoint_apply(base, c, &t));
    return Backend(t);
}

/// Fills backend.height / backend.width when left at 0.
void resolve_geometry(RunConfig& cfg) {
    Json& backend = cfg.values["backend"];
    if (!backend["params_bin"].get<std::string>().empty()) return;
    if (backend["height"].get<std::uint64_t>() != 0 && backend["width"].get<std::uint64_t>() != 0) return;
    std::size_t h = 0, w = 0;
    const Json& in = cfg.values["input"];
    if (cfg.command == Command::Generate) {
        const Checkpoint c = load_checkpoint(in["checkpoint"]);
        const Json desc = checkpoint_info(c.get())["backend"];
        h = desc["height"].get<std::size_t>();
        w = desc["width"].get<std::size_t>();
    } else {
        const std::string path = cfg.command == Command::DiscoverMask ? split_list(in["images"].get<std::string>()).front()
                                                                      : in["image"].get<std::string>();
        const Image img = load_image(path);
        check(ic_image_shape(img.get(), &h, &w));
    }
    if (backend["height"].get<std::uint64_t>() == 0) backend["height"] = h;
    if (backend["width"].get<std::uint64_t>() == 0) backend["width"] = w;
}

Json input_digests(const RunConfig& cfg) {
    Json out = Json::object();
    for (const auto& [name, value] : cfg.values["input"].items()) {
        const std::string text = value.get<std::string>();
        if (text.empty()) continue;
        if (name == "images") {
            Json list = Json::array();
            for (const std::string& p : split_list(text)) list.push_back({{"path", p}, {"sha256", file_digest(p)}});
            out[name] = list;
        } else {
            out[name] = {{"path", text}, {"sha256", file_digest(text)}};
        }
    }
    for (const char* key : {"params_bin", "params_json"}) {
        const std::string p = cfg.values["backend"][key];
        if (!p.empty()) out[std::string("backend.") + key] = {{"path", p}, {"sha256", file_digest(p)}};
    }
    return out;
}

struct Produced {
    Json artifacts = Json::object();
    Json traces = Json::object();
    std::vector<std::string> warnings;
};

Produced run_learn(const RunConfig& cfg, const fs::path& stage) {
    const Json& in = cfg.values["input"];
    const Backend base = make_backend(cfg);
    const Image img = load_image(in["image"]);
    const Mask mask = load_mask(in["mask"]);
    ic_checkpoint* c = nullptr;
    check(ic_learn(base.get(), img.get(), mask.get(), cfg.values["object_class"].get<std::string>().c_str(),
                   library_section(cfg, "train").dump().c_str(), &c));
    const Checkpoint ckpt(c);
    check(ic_checkpoint_save(ckpt.get(), (stage / "checkpoint.bin").c_str()));
    check(ic_checkpoint_write_trace(ckpt.get(), (stage / "traces" / "loss.csv").c_str()));
    Produced p;
    p.artifacts = {{"checkpoint", "checkpoint.bin"}, {"loss_trace", "traces/loss.csv"}};
    const Json info = checkpoint_info(ckpt.get());
    p.traces = {{"loss", "traces/loss.csv"}, {"token", info["token"]}, {"base_digest", info["base_digest"]}};
    return p;
}

Produced run_edit(const RunConfig& cfg, const fs::path& stage) {
    const Json& in = cfg.values["input"];
    const Checkpoint ckpt = load_checkpoint(in["checkpoint"]);
    const Backend base = make_backend(cfg);
    const Backend tuned = apply(base.get(), ckpt.get());
    const Image img = load_image(in["image"]);
    const Mask mask = load_mask(in["mask"]);
    const std::string token = checkpoint_info(ckpt.get())["token"]["name"];
    char* prompt = nullptr;
    check(ic_build_prompt(cfg.values["edit"]["prompt"].get<std::string>().c_str(),
                          cfg.values["object_class"].get<std::string>().c_str(), token.c_str(), &prompt));
    const std::string text = take_string(prompt);
    ic_image* out = nullptr;
    char* trace = nullptr;
    check(ic_edit(tuned.get(), ckpt.get(), img.get(), mask.get(), text.c_str(), library_section(cfg, "edit").dump().c_str(),
                  &out, &trace));
    const Image edited(out);
    Json tj = Json::parse(take_string(trace));
    tj["prompt"] = text;
    check(ic_image_save(edited.get(), (stage / "images" / "edited.png").c_str()));
    write_text_atomic(stage / "traces" / "edit.json", tj.dump(2) + "\n");
    Produced p;
    p.artifacts = {{"image", "images/edited.png"}, {"trace", "traces/edit.json"}};
    p.traces = {{"final_objective", tj["final_objective"]}, {"steps", tj["steps"].size()}, {"prompt", text}};
    for (const Json& w : tj["warnings"]) p.warnings.push_back(w);
    return p;
}

Produced run_generate(const RunConfig& cfg, const fs::path& stage) {
    const Checkpoint ckpt = load_checkpoint(cfg.values["input"]["checkpoint"]);
    const Backend base = make_backend(cfg);
    const Backend tuned = apply(base.get(), ckpt.get());
    ic_image* out = nullptr;
    check(ic_generate(base.get(), tuned.get(), ckpt.get(), library_section(cfg, "generate").dump().c_str(), &out));
    const Image img(out);
    check(ic_image_save(img.get(), (stage / "images" / "generated.png").c_str()));
    Produced p;
    p.artifacts = {{"image", "images/generated.png"}};
    return p;
}

Json extract(const ic_backend* b, const ic_region* r, const ic_image* img, const RunConfig& cfg, const fs::path& out) {
    ic_mask* m = nullptr;
    char* info = nullptr;
    check(ic_extract_mask(b, r, img, library_section(cfg, "extract").dump().c_str(), &m, &info));
    const Mask mask(m);
    check(ic_mask_save(mask.get(), out.c_str()));
    return Json::parse(take_string(info));
}

Json region_trace(const ic_region* r) {
    char* text = nullptr;
    check(ic_region_trace(r, &text));
    return Json::parse(take_string(text));
}

Produced run_match(const RunConfig& cfg, const fs::path& stage) {
    const Json& in = cfg.values["input"];
    const Checkpoint ckpt = load_checkpoint(in["checkpoint"]);
    const Backend base = make_backend(cfg);
    const Backend tuned = apply(base.get(), ckpt.get());
    const Image source = load_image(in["image"]);
    const Mask source_mask = load_mask(in["mask"]);
    const Image target = load_image(in["target_image"]);
    ic_region* r = nullptr;
    check(ic_learn_target_matcher(tuned.get(), ckpt.get(), source.get(), source_mask.get(),
                                  cfg.values["object_class"].get<std::string>().c_str(),
                                  library_section(cfg, "region").dump().c_str(), &r));
    const Region region(r);
    const Json info = extract(tuned.get(), region.get(), target.get(), cfg, stage / "masks" / "target.png");
    const Json trace{{"loss", region_trace(region.get())}, {"extraction", info}};
    write_text_atomic(stage / "traces" / "match.json", trace.dump(2) + "\n");
    Produced p;
    p.artifacts = {{"mask", "masks/target.png"}, {"trace", "traces/match.json"}};
    p.traces = {{"confidence", info["confidence"]}, {"mask_area", info["mask_area"]}};
    return p;
}

Produced run_discover(const RunConfig& cfg, const fs::path& stage) {
    const std::vector<std::string> paths = split_list(cfg.values["input"]["images"].get<std::string>());
    const Backend base = make_backend(cfg);
    std::vector<Image> images;
    std::vector<const ic_image*> raw;
    for (const std::string& p : paths) {
        images.push_back(load_image(p));
        raw.push_back(images.back().get());
    }
    ic_region* r = nullptr;
    check(ic_learn_common_concept(base.get(), raw.data(), raw.size(), cfg.values["object_class"].get<std::string>().c_str(),
                                  library_section(cfg, "region").dump().c_str(), &r));
    const Region region(r);
    Produced p;
    Json masks = Json::array(), infos = Json::array();
    for (std::size_t i = 0; i < images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "source_%02zu.png", i);
        infos.push_back(extract(base.get(), region.get(), images[i].get(), cfg, stage / "masks" / name));
        masks.push_back(std::string("masks/") + name);
    }
    const Json trace{{"loss", region_trace(region.get())}, {"extraction", infos}};
    write_text_atomic(stage / "traces" / "discover.json", trace.dump(2) + "\n");
    p.artifacts = {{"masks", masks}, {"trace", "traces/discover.json"}};
    Json conf = Json::array();
    for (const Json& i : infos) conf.push_back(i["confidence"]);
    p.traces = {{"confidence", conf}};
    return p;
}

Produced dispatch(const RunConfig& cfg, const fs::path& stage) {
    switch (cfg.command) {
        case Command::Learn: return run_learn(cfg, stage);
        case Command::Edit: return run_edit(cfg, stage);
        case Command::Generate: return run_generate(cfg, stage);
        case Command::MatchMask: return run_match(cfg, stage);
        case Command::DiscoverMask: return run_discover(cfg, stage);
    }
    throw std::logic_error("unknown command");
}

Json base_manifest(const RunConfig& cfg, std::chrono::system_clock::time_point started) {
    Json m;
    m["tool"] = {{"name", "incontext"}, {"version", ic_version()}};
    m["command"] = to_string(cfg.command);
    m["status"] = "running";
    m["config"] = cfg.values;
    m["seeds"] = {{"rule", "splitmix64(master ^ fnv1a64(subsystem))"},
                  {"master", cfg.values["seed"]},
                  {"derived", derived_seeds(cfg.values["seed"].get<std::uint64_t>())}};
    m["started_at"] = utc_timestamp(started);
    return m;
}

bool is_nonempty_dir(const fs::path& p) { return fs::is_directory(p) && !fs::is_empty(p); }

}  // namespace

RunOutcome run(RunConfig cfg, const RunOptions& options) {
    const auto started = std::chrono::system_clock::now();
    const auto t0 = std::chrono::steady_clock::now();
    RunOutcome outcome;
    const std::string dir_text = cfg.values["output"]["dir"].get<std::string>();
    const fs::path outdir = dir_text.empty() ? fs::path() : fs::absolute(dir_text).lexically_normal();
    bool may_write = false;
    fs::path stage;
    Json manifest = base_manifest(cfg, started);

    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    try {
        if (outdir.empty()) validate_inputs(cfg);
        if (fs::exists(outdir) && !fs::is_directory(outdir))
            throw ConfigError("output path '" + outdir.string() + "' exists and is not a directory");
        if (is_nonempty_dir(outdir) && !options.force)
            throw ConfigError("output directory '" + outdir.string() + "' is not empty (use --force to replace it)");
        may_write = true;
        validate_inputs(cfg);

        stage = outdir.parent_path() / ("." + outdir.filename().string() + ".staging-" + std::to_string(::getpid()));
        fs::remove_all(stage);
        for (const char* sub : {"images", "masks", "traces"}) fs::create_directories(stage / sub);

        resolve_geometry(cfg);
        manifest["config"] = cfg.values;
        manifest["inputs"] = input_digests(cfg);
        const Produced p = dispatch(cfg, stage);
        manifest["status"] = "ok";
        manifest["artifacts"] = p.artifacts;
        manifest["traces"] = p.traces;
        manifest["warnings"] = p.warnings;
        manifest["wall_clock_seconds"] = elapsed();
        write_text_atomic(stage / "manifest.json", manifest.dump(2) + "\n");
        if (fs::exists(outdir)) fs::remove_all(outdir);
        fs::create_directories(outdir.parent_path());
        fs::rename(stage, outdir);
        outcome.manifest = manifest;
        return outcome;
    } catch (const ConfigError& e) {
        outcome.exit_code = kExitUsage;
        outcome.message = e.what();
    } catch (const RunError& e) {
        outcome.exit_code = kExitRuntime;
        outcome.message = e.what();
    } catch (const std::exception& e) {
        outcome.exit_code = kExitRuntime;
        outcome.message = e.what();
    }

    std::error_code ec;
    if (!stage.empty()) fs::remove_all(stage, ec);
    if (!may_write || outdir.empty()) return outcome;
    try {
        manifest["status"] = "failed";
        manifest["error"] = {{"message", outcome.message}, {"exit_code", outcome.exit_code}};
        manifest["wall_clock_seconds"] = elapsed();
        fs::remove_all(outdir);
        fs::create_directories(outdir);
        write_text_atomic(outdir / "manifest.json", manifest.dump(2) + "\n");
        outcome.manifest = manifest;
    } catch (const std::exception& e) {
        outcome.message += std::string(" (could not record failure: ") + e.what() + ")";
    }
    return outcome;
}

Json read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read manifest '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

}  // namespace incontext::cli
