// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/checkpoint.hpp"

#include "incontext/digest.hpp"
#include "incontext/error.hpp"
#include "incontext/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace incontext {
namespace {

constexpr const char* kModule = "checkpoint";
constexpr char kMagic[8] = {'I', 'C', 'C', 'K', 'P', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, const T& value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        T value;
        std::memcpy(&value, take(sizeof(T)).data(), sizeof(T));
        return value;
    }

    std::span<const std::uint8_t> take(std::size_t n) {
        if (n > bytes_.size() - pos_) throw FormatError(kModule, "checkpoint is truncated");
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

Json shape_json(const Shape& s) {
    Json out = Json::array();
    for (std::size_t d : s) out.push_back(d);
    return out;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const ConceptCheckpoint& ckpt) {
    std::vector<double> payload(ckpt.token.embedding.values().begin(), ckpt.token.embedding.values().end());
    Json tensors = Json::array();
    for (const auto& [name, t] : ckpt.ca_weight_deltas) {
        tensors.push_back({{"name", name}, {"shape", shape_json(t.shape())}, {"offset", payload.size()}});
        payload.insert(payload.end(), t.values().begin(), t.values().end());
    }
    const Json manifest{{"format", "incontext-concept-checkpoint"},
                        {"version", ckpt.version},
                        {"token",
                         {{"name", ckpt.token.name},
                          {"init_source", ckpt.token.init_source},
                          {"shape", shape_json(ckpt.token.embedding.shape())},
                          {"offset", 0}}},
                        {"ca_weight_deltas", tensors},
                        {"seed", ckpt.config.seed},
                        {"config", to_json(ckpt.config)},
                        {"backend", to_json(ckpt.backend)},
                        {"base_digest", ckpt.base_digest},
                        {"source_digest", ckpt.source_digest}};
    const std::string text = manifest.dump();

    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put(out, static_cast<std::uint32_t>(ckpt.version));
    put(out, static_cast<std::uint64_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    put(out, static_cast<std::uint64_t>(payload.size()));
    const auto* raw = reinterpret_cast<const std::uint8_t*>(payload.data());
    out.insert(out.end(), raw, raw + payload.size() * sizeof(double));
    const Sha256 digest = sha256(out);
    out.insert(out.end(), digest.begin(), digest.end());
    return out;
}

ConceptCheckpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw FormatError(kModule, "not a concept checkpoint (bad magic)");
    Reader r(bytes.subspan(sizeof(kMagic)));
    const auto version = r.get<std::uint32_t>();
    if (version != static_cast<std::uint32_t>(ConceptCheckpoint::kVersion))
        throw VersionError(kModule, "checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                        std::to_string(ConceptCheckpoint::kVersion) + ")");
    Sha256 stored{};
    if (bytes.size() < stored.size()) throw FormatError(kModule, "checkpoint is truncated");
    const auto body = bytes.first(bytes.size() - stored.size());
    std::memcpy(stored.data(), bytes.data() + body.size(), stored.size());
    if (sha256(body) != stored) throw DigestError(kModule, "checkpoint digest mismatch (file is corrupt or was modified)");

    const auto manifest_len = r.get<std::uint64_t>();
    const auto text = r.take(manifest_len);
    const auto count = r.get<std::uint64_t>();
    if (count > (bytes.size() / sizeof(double))) throw FormatError(kModule, "checkpoint payload size is implausible");
    const auto raw = r.take(count * sizeof(double));
    std::vector<double> payload(count);
    std::memcpy(payload.data(), raw.data(), raw.size());

    auto slice = [&](const Json& entry) {
        const Shape shape = entry.at("shape").get<Shape>();
        const std::size_t off = entry.at("offset").get<std::size_t>();
        const std::size_t n = shape_numel(shape);
        if (off > payload.size() || n > payload.size() - off) throw FormatError(kModule, "tensor extends past the payload");
        return Tensor(shape, std::vector<double>(payload.begin() + off, payload.begin() + off + n));
    };

    ConceptCheckpoint ckpt;
    try {
        const Json manifest = Json::parse(text.begin(), text.end());
        if (manifest.at("format").get<std::string>() != "incontext-concept-checkpoint")
            throw FormatError(kModule, "unexpected checkpoint format tag");
        ckpt.version = manifest.at("version").get<int>();
        const Json& tok = manifest.at("token");
        ckpt.token.name = tok.at("name").get<std::string>();
        ckpt.token.init_source = tok.at("init_source").get<std::string>();
        ckpt.token.embedding = slice(tok);
        for (const Json& entry : manifest.at("ca_weight_deltas"))
            ckpt.ca_weight_deltas.emplace(entry.at("name").get<std::string>(), slice(entry));
        ckpt.config = training_from_json(manifest.at("config"));
        ckpt.backend = descriptor_from_json(manifest.at("backend"));
        ckpt.base_digest = manifest.at("base_digest").get<std::string>();
        ckpt.source_digest = manifest.at("source_digest").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(kModule, std::string("bad checkpoint manifest: ") + e.what());
    }
    return ckpt;
}

void save_checkpoint(const ConceptCheckpoint& ckpt, const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(kModule, "cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(kModule, "short write to '" + path.string() + "'");
}

ConceptCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(kModule, "cannot read '" + path.string() + "'");
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

void write_loss_trace(const std::filesystem::path& path, std::span<const LossRecord> trace) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(kModule, "cannot write '" + path.string() + "'");
    out << "step,l_con,l_att,l_roi,l_tot,t\n" << std::setprecision(17);
    for (const LossRecord& r : trace)
        out << r.step << ',' << r.l_con << ',' << r.l_att << ',' << r.l_roi << ',' << r.l_tot << ',' << r.t << '\n';
    if (!out) throw IoError(kModule, "short write to '" + path.string() + "'");
}

}  // namespace incontext
