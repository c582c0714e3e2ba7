#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "afpnet/common.hpp"
#include "afpnet/config.hpp"
#include "afpnet/lexer.hpp"
#include "afpnet/model.hpp"

namespace afpnet {

// Checkpoint archive: magic, format version, config JSON, vocabulary JSON,
// then every parameter tensor as name + shape + row-major little-endian
// float32 data, in canonical visit_params order.
inline constexpr char kCheckpointMagic[8] = {'A', 'F', 'P', 'N', 'E', 'T', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace detail {

template <class V>
void write_pod(std::ofstream& out, const V& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <class V>
V read_pod(std::ifstream& in, const char* what) {
    V v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!in) throw DataError(std::string("checkpoint truncated while reading ") + what);
    return v;
}

inline void write_blob(std::ofstream& out, const std::string& s) {
    write_pod(out, static_cast<std::uint64_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_blob(std::ifstream& in, const char* what) {
    const auto len = read_pod<std::uint64_t>(in, what);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError(std::string("checkpoint truncated while reading ") + what);
    return s;
}

}  // namespace detail

template <class T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model,
                     const Vocabulary& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::write_pod(out, kCheckpointVersion);
    detail::write_blob(out, to_json(model.config).dump());
    detail::write_blob(out, vocab.to_json().dump());

    std::uint32_t count = 0;
    visit_params(model, [&](const std::string&, const T*, std::size_t,
                            const std::vector<std::size_t>&) { ++count; });
    detail::write_pod(out, count);

    std::vector<float> buffer;
    visit_params(model, [&](const std::string& name, const T* data, std::size_t n,
                            const std::vector<std::size_t>& shape) {
        detail::write_pod(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_pod(out, static_cast<std::uint32_t>(shape.size()));
        for (std::size_t d : shape) detail::write_pod(out, static_cast<std::uint64_t>(d));
        buffer.resize(n);
        for (std::size_t i = 0; i < n; ++i) buffer[i] = static_cast<float>(data[i]);
        out.write(reinterpret_cast<const char*>(buffer.data()),
                  static_cast<std::streamsize>(n * sizeof(float)));
    });
    if (!out) throw DataError("cannot write checkpoint: " + path.string());
}

template <class T>
struct Checkpoint {
    ModelConfig config;
    Vocabulary vocab;
    Model<T> model;
};

/// Loads and validates a checkpoint: every tensor must match the shape the
/// config implies, and every expected tensor must be present exactly once.
template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    char magic[sizeof(kCheckpointMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw DataError("not an AFPNet checkpoint: " + path.string());
    const auto version = detail::read_pod<std::uint32_t>(in, "version");
    if (version != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint<T> ck;
    try {
        ck.config = model_config_from_json(nlohmann::json::parse(detail::read_blob(in, "config")));
        ck.vocab = Vocabulary::from_json(nlohmann::json::parse(detail::read_blob(in, "vocabulary")));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
    }
    ck.model = Model<T>::zeros(ck.config, ck.vocab.size());

    struct Slot {
        T* data;
        std::vector<std::size_t> shape;
        bool filled = false;
    };
    std::map<std::string, Slot> slots;
    visit_params(ck.model, [&](const std::string& name, T* data, std::size_t,
                               const std::vector<std::size_t>& shape) {
        slots.emplace(name, Slot{data, shape, false});
    });

    const auto count = detail::read_pod<std::uint32_t>(in, "tensor count");
    std::vector<float> buffer;
    for (std::uint32_t t = 0; t < count; ++t) {
        const auto name_len = detail::read_pod<std::uint32_t>(in, "tensor name length");
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        if (!in) throw DataError("checkpoint truncated while reading tensor name");
        const auto ndim = detail::read_pod<std::uint32_t>(in, "tensor rank");
        std::vector<std::size_t> shape(ndim);
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            shape[d] = static_cast<std::size_t>(detail::read_pod<std::uint64_t>(in, "tensor dim"));
            n *= shape[d];
        }
        auto it = slots.find(name);
        if (it == slots.end()) throw DataError("checkpoint holds unknown tensor '" + name + "'");
        if (it->second.filled) throw DataError("checkpoint holds tensor '" + name + "' twice");
        if (it->second.shape != shape)
            throw DataError("checkpoint tensor '" + name + "' shape disagrees with config");
        buffer.resize(n);
        in.read(reinterpret_cast<char*>(buffer.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        if (!in) throw DataError("checkpoint truncated while reading tensor '" + name + "'");
        for (std::size_t i = 0; i < n; ++i) it->second.data[i] = static_cast<T>(buffer[i]);
        it->second.filled = true;
    }
    for (const auto& [name, slot] : slots)
        if (!slot.filled) throw DataError("checkpoint is missing tensor '" + name + "'");
    return ck;
}

}  // namespace afpnet
