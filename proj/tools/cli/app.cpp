// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "app.hpp"

#include "config.hpp"
#include "runner.hpp"

#include "CLI11.hpp"
#include "incontext/incontext.h"

#include <algorithm>
#include <ostream>

namespace incontext::cli {
namespace {

struct CommandArgs {
    std::string config_file;
    std::string outdir;
    bool force = false;
    bool print_config = false;
};

void add_common(CLI::App& sub, CommandArgs& a) {
    sub.add_option("--config", a.config_file, "key = value config file")->check(CLI::ExistingFile);
    sub.add_option("--outdir", a.outdir, "output directory (same as output.dir)");
    sub.add_flag("--force", a.force, "replace a non-empty output directory");
    sub.allow_extras();
}

int finish(const RunOutcome& r, std::ostream& out, std::ostream& err) {
    if (r.exit_code != kExitOk) {
        err << "error: " << r.message << "\n";
        return r.exit_code;
    }
    if (r.manifest.contains("warnings"))
        for (const auto& w : r.manifest["warnings"]) err << "warning: " << w.get<std::string>() << "\n";
    out << r.manifest["config"]["output"]["dir"].get<std::string>() << "\n";
    return kExitOk;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extras) {
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& a = extras[i];
        if (a.rfind("--", 0) != 0 || a.size() == 2) throw ConfigError("unexpected argument '" + a + "'");
        const std::string body = a.substr(2);
        const auto eq = body.find('=');
        if (eq != std::string::npos) {
            out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
            continue;
        }
        if (i + 1 >= extras.size() || extras[i + 1].rfind("--", 0) == 0)
            throw ConfigError("missing value for '--" + body + "'");
        out.emplace_back(body, extras[++i]);
    }
    return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"In-context concept learning and transfer on diffusion backends", "incontext"};
    app.set_version_flag("--version", std::string("incontext ") + ic_version());
    app.require_subcommand(1);

    CommandArgs cmd_args;
    std::vector<std::pair<Command, CLI::App*>> subs;
    for (Command c : all_commands()) {
        CLI::App* sub = app.add_subcommand(std::string(to_string(c)));
        add_common(*sub, cmd_args);
        sub->add_flag("--print-config", cmd_args.print_config, "print the resolved config and exit");
        subs.emplace_back(c, sub);
    }
    subs[0].second->description("learn a concept token and cross-attention deltas from an image region");
    subs[1].second->description("transfer a learned concept into a masked region of an image");
    subs[2].second->description("generate an object with a learned concept");
    subs[3].second->description("find the region of a target image that matches a learned concept");
    subs[4].second->description("find the region shared by several images");

    std::string manifest_path;
    CommandArgs rerun_args;
    CLI::App* rerun = app.add_subcommand("rerun", "repeat a run from its manifest");
    rerun->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();
    rerun->add_option("--outdir", rerun_args.outdir, "output directory")->required();
    rerun->add_flag("--force", rerun_args.force, "replace a non-empty output directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::CallForVersion& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (rerun->parsed()) {
            RunConfig cfg = config_from_manifest(read_manifest(manifest_path));
            cfg.values["output"]["dir"] = rerun_args.outdir;
            return finish(run(cfg, RunOptions{rerun_args.force}), out, err);
        }
        const auto it = std::find_if(subs.begin(), subs.end(), [](const auto& s) { return s.second->parsed(); });
        RunConfig cfg = default_config(it->first);
        if (!cmd_args.config_file.empty()) apply_config_file(cfg, cmd_args.config_file);
        for (const auto& [key, value] : parse_overrides(it->second->remaining())) set_value(cfg, key, value);
        if (!cmd_args.outdir.empty()) cfg.values["output"]["dir"] = cmd_args.outdir;
        if (cmd_args.print_config) {
            out << to_config_text(cfg);
            return kExitOk;
        }
        return finish(run(cfg, RunOptions{cmd_args.force}), out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace incontext::cli
