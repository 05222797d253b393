// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include "incontext/incontext.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace incontext::cli {
namespace {

constexpr const char* kSeededSections[] = {"train", "edit", "generate", "region", "extract"};

struct CommandInfo {
    Command command;
    std::string_view name;
    std::vector<std::string_view> sections;  // searched for bare keys
    std::vector<std::string_view> inputs;    // required input.* keys
};

const std::vector<CommandInfo>& command_table() {
    static const std::vector<CommandInfo> table{
        {Command::Learn, "learn", {"train", "train.augmentation"}, {"image", "mask"}},
        {Command::Edit, "edit", {"edit"}, {"checkpoint", "image", "mask"}},
        {Command::Generate, "generate", {"generate"}, {"checkpoint"}},
        {Command::MatchMask, "match-mask", {"region", "extract"}, {"checkpoint", "image", "mask", "target_image"}},
        {Command::DiscoverMask, "discover-mask", {"region", "extract"}, {"images"}},
    };
    return table;
}

const CommandInfo& info(Command c) {
    for (const CommandInfo& i : command_table())
        if (i.command == c) return i;
    throw std::logic_error("unknown command");
}

Json library_default(const char* section) {
    char* text = nullptr;
    if (ic_default_config(section, &text) != IC_OK) throw std::logic_error(ic_last_error());
    Json j = Json::parse(text);
    ic_string_free(text);
    return j;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

const Json* find_path(const Json& root, std::string_view dotted) {
    const Json* node = &root;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted.find('.', start);
        const std::string part(dotted.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
        if (!node->is_object() || !node->contains(part)) return nullptr;
        node = &(*node)[part];
        if (dot == std::string_view::npos) return node;
        start = dot + 1;
    }
}

Json& at_path(Json& root, std::string_view dotted) {
    Json* node = &root;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted.find('.', start);
        node = &(*node)[std::string(dotted.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start))];
        if (dot == std::string_view::npos) return *node;
        start = dot + 1;
    }
}

[[noreturn]] void mismatch(std::string_view key, std::string_view expected, std::string_view text) {
    throw ConfigError("type mismatch for '" + std::string(key) + "': expected " + std::string(expected) + ", got '" +
                      std::string(text) + "'");
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end;
}

Json parse_typed(std::string_view key, const Json& like, const std::string& text) {
    if (like.is_boolean()) {
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        mismatch(key, "true or false", text);
    }
    if (like.is_number_unsigned()) {
        std::uint64_t v = 0;
        if (!parse_number(text, v)) mismatch(key, "a nonnegative integer", text);
        return v;
    }
    if (like.is_number_integer()) {
        std::int64_t v = 0;
        if (!parse_number(text, v)) mismatch(key, "an integer", text);
        return v;
    }
    if (like.is_number_float()) {
        double v = 0.0;
        if (!parse_number(text, v) || !std::isfinite(v)) mismatch(key, "a number", text);
        return v;
    }
    if (like.is_string()) {
        if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
            try {
                return Json::parse(text).get<std::string>();
            } catch (const nlohmann::json::exception&) {
                mismatch(key, "a string", text);
            }
        }
        return text;
    }
    if (like.is_array()) {
        Json arr = Json::array();
        for (const std::string& item : split_list(text)) {
            std::int64_t v = 0;
            if (!parse_number(std::string_view(item), v)) mismatch(key, "a comma-separated list of integers", text);
            arr.push_back(v);
        }
        return arr;
    }
    throw std::logic_error("unsupported default type at " + std::string(key));
}

bool same_kind(const Json& like, const Json& v) {
    if (like.is_boolean()) return v.is_boolean();
    if (like.is_number_unsigned()) return v.is_number_unsigned();
    if (like.is_number_integer()) return v.is_number_integer();
    if (like.is_number_float()) return v.is_number();
    if (like.is_string()) return v.is_string();
    if (like.is_array()) return v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_number_integer(); });
    return false;
}

void merge_strict(Json& into, const Json& from, const std::string& prefix) {
    if (!from.is_object()) throw ConfigError("manifest config '" + prefix + "' must be an object");
    for (const auto& [k, v] : from.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (!into.contains(k)) throw ConfigError("unknown key '" + key + "'");
        Json& slot = into[k];
        if (slot.is_object()) {
            merge_strict(slot, v, key);
        } else {
            if (!same_kind(slot, v)) throw ConfigError("type mismatch for '" + key + "' in manifest: " + v.dump());
            slot = slot.is_number_float() ? Json(v.get<double>()) : v;
        }
    }
}

void flatten_into(const Json& node, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
    for (const auto& [k, v] : node.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (v.is_object()) {
            flatten_into(v, key, out);
        } else if (v.is_array()) {
            std::string text;
            for (const Json& e : v) text += (text.empty() ? "" : ",") + e.dump();
            out.emplace_back(key, text);
        } else if (v.is_string()) {
            out.emplace_back(key, v.get<std::string>());
        } else {
            out.emplace_back(key, v.dump());
        }
    }
}

}  // namespace

std::string_view to_string(Command c) { return info(c).name; }

std::optional<Command> command_from_string(std::string_view s) {
    for (const CommandInfo& i : command_table())
        if (i.name == s) return i.command;
    return std::nullopt;
}

const std::vector<Command>& all_commands() {
    static const std::vector<Command> cmds{Command::Learn, Command::Edit, Command::Generate, Command::MatchMask,
                                           Command::DiscoverMask};
    return cmds;
}

const Json& default_values() {
    static const Json values = [] {
        Json v;
        v["seed"] = std::uint64_t{0};
        v["object_class"] = "";
        v["input"] = Json{{"image", ""}, {"mask", ""}, {"checkpoint", ""}, {"target_image", ""}, {"images", ""}};
        v["output"] = Json{{"dir", ""}};
        Json backend = library_default("backend");
        backend["height"] = std::uint64_t{0};
        backend["width"] = std::uint64_t{0};
        v["backend"] = backend;
        for (const char* s : kSeededSections) {
            Json sec = library_default(s);
            sec.erase("seed");
            v[s] = sec;
        }
        v["edit"]["prompt"] = "a photo of an {OBJECT}, with [v*] style";
        v["generate"].erase("object_class");
        return v;
    }();
    return values;
}

RunConfig default_config(Command command) { return RunConfig{command, default_values()}; }

std::string resolve_key(Command command, std::string_view key) {
    const Json& defaults = default_values();
    auto is_leaf = [&](const std::string& path) {
        const Json* node = find_path(defaults, path);
        return node && !node->is_object();
    };
    const std::string k(key);
    if (k.find('.') != std::string::npos) {
        if (is_leaf(k)) return k;
        throw ConfigError("unknown key '" + k + "'");
    }
    for (std::string_view section : info(command).sections)
        if (is_leaf(std::string(section) + "." + k)) return std::string(section) + "." + k;
    if (is_leaf(k)) return k;
    for (const char* section : {"input", "output", "backend"})
        if (is_leaf(std::string(section) + "." + k)) return std::string(section) + "." + k;
    throw ConfigError("unknown key '" + k + "'");
}

void set_value(RunConfig& cfg, std::string_view key, std::string_view text) {
    const std::string path = resolve_key(cfg.command, key);
    at_path(cfg.values, path) = parse_typed(path, *find_path(default_values(), path), trim(text));
}

void apply_config_text(RunConfig& cfg, std::string_view text, std::string_view origin) {
    std::istringstream in{std::string(text)};
    std::string line;
    for (int number = 1; std::getline(in, line); ++number) {
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        const std::string where = std::string(origin) + ":" + std::to_string(number);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        try {
            set_value(cfg, trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    apply_config_text(cfg, text.str(), path.string());
}

std::vector<std::pair<std::string, std::string>> flatten(const Json& values) {
    std::vector<std::pair<std::string, std::string>> out;
    flatten_into(values, "", out);
    return out;
}

std::string to_config_text(const RunConfig& cfg) {
    std::string out = "# incontext " + std::string(to_string(cfg.command)) + "\n";
    for (const auto& [key, value] : flatten(cfg.values)) {
        const Json* node = find_path(cfg.values, key);
        out += key + " = " + (node->is_string() ? node->dump() : value) + "\n";
    }
    return out;
}

RunConfig config_from_manifest(const Json& manifest) {
    if (!manifest.is_object() || !manifest.contains("command") || !manifest.contains("config"))
        throw ConfigError("manifest lacks 'command' or 'config'");
    const auto command = command_from_string(manifest["command"].get<std::string>());
    if (!command) throw ConfigError("manifest names unknown command '" + manifest["command"].get<std::string>() + "'");
    RunConfig cfg = default_config(*command);
    merge_strict(cfg.values, manifest["config"], "");
    return cfg;
}

void validate_inputs(const RunConfig& cfg) {
    const Json& v = cfg.values;
    if (v["output"]["dir"].get<std::string>().empty()) throw ConfigError("missing required output.dir (--outdir)");
    if (v["object_class"].get<std::string>().empty()) throw ConfigError("missing required object_class");
    const auto& required = info(cfg.command).inputs;
    for (const auto& [name, value] : v["input"].items()) {
        const std::string text = value.get<std::string>();
        const bool needed = std::find(required.begin(), required.end(), name) != required.end();
        if (!needed && !text.empty())
            throw ConfigError("input." + name + " is not used by " + std::string(to_string(cfg.command)));
        if (!needed) continue;
        if (text.empty()) throw ConfigError("missing required input." + name);
        const std::vector<std::string> paths = name == "images" ? split_list(text) : std::vector<std::string>{text};
        if (name == "images" && paths.size() < 2) throw ConfigError("input.images needs at least two images");
        for (const std::string& p : paths)
            if (!std::filesystem::is_regular_file(p))
                throw ConfigError("input." + name + ": file '" + p + "' does not exist");
    }
    const std::string bin = v["backend"]["params_bin"], js = v["backend"]["params_json"];
    for (const std::string& p : {bin, js})
        if (!p.empty() && !std::filesystem::is_regular_file(p))
            throw ConfigError("backend parameter file '" + p + "' does not exist");
}

Json library_section(const RunConfig& cfg, std::string_view section) {
    const std::string name(section);
    Json out = cfg.values[name];
    if (name == "backend") return out;
    out["seed"] = ic_derive_seed(cfg.values["seed"].get<std::uint64_t>(), name.c_str());
    if (name == "edit") out.erase("prompt");
    if (name == "generate") out["object_class"] = cfg.values["object_class"];
    return out;
}

Json derived_seeds(std::uint64_t master) {
    Json out;
    for (const char* s : kSeededSections) out[s] = ic_derive_seed(master, s);
    return out;
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string item = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace incontext::cli
