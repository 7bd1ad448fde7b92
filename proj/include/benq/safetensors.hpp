#pragma once

// safetensors layout: u64 LE header length N, N bytes of JSON header, then
// the data buffer. Each header entry (except "__metadata__") is
//   {"dtype": "F32", "shape": [..], "data_offsets": [begin, end]}
// with offsets relative to the start of the data buffer.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "file_util.hpp"
#include "tensor.hpp"

namespace benq {

struct Container {
    NamedTensors tensors;  // sorted by name
    std::map<std::string, std::string> metadata;
    std::vector<std::string> warnings;
};

inline constexpr std::uint64_t kMaxSafetensorsHeader = 100ull << 20;

inline Container read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    const std::string where = "'" + path.string() + "'";

    std::error_code ec;
    const std::uint64_t file_size = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("cannot stat " + where + ": " + ec.message());
    if (file_size < 8) throw IoError(where + ": truncated safetensors header length");

    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), 8);
    if (header_len > kMaxSafetensorsHeader || header_len > file_size - 8) {
        throw IoError(where + ": safetensors header length " + std::to_string(header_len) + " is out of bounds");
    }
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw IoError(where + ": truncated safetensors header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(where + ": malformed safetensors header: " + e.what());
    }
    if (!header.is_object()) throw IoError(where + ": safetensors header is not a JSON object");

    const std::uint64_t data_start = 8 + header_len;
    const std::uint64_t data_size = file_size - data_start;

    Container out;
    for (const auto& [name, info] : header.items()) {
        if (name == "__metadata__") {
            if (info.is_object()) {
                for (const auto& [k, v] : info.items()) {
                    if (v.is_string()) out.metadata[k] = v.get<std::string>();
                }
            }
            continue;
        }
        WeightTensor t;
        t.name = name;
        std::uint64_t begin = 0, end = 0;
        try {
            t.dtype = parse_dtype(info.at("dtype").get<std::string>());
            t.shape = info.at("shape").get<std::vector<std::uint64_t>>();
            const auto offsets = info.at("data_offsets").get<std::vector<std::uint64_t>>();
            if (offsets.size() != 2) throw IoError("data_offsets must have two entries");
            begin = offsets[0];
            end = offsets[1];
        } catch (const nlohmann::json::exception& e) {
            throw IoError(where + ": malformed entry for tensor '" + name + "': " + e.what());
        } catch (const IoError& e) {
            throw IoError(where + ": tensor '" + name + "': " + e.what());
        }
        if (begin > end || end > data_size) {
            throw IoError(where + ": tensor '" + name + "' data_offsets [" + std::to_string(begin) + ", " +
                          std::to_string(end) + ") exceed the data buffer of " + std::to_string(data_size) +
                          " bytes (truncated payload?)");
        }
        const std::uint64_t expected = t.numel() * dtype_size(t.dtype);
        if (end - begin != expected) {
            throw IoError(where + ": tensor '" + name + "' has " + std::to_string(end - begin) +
                          " bytes, shape and dtype require " + std::to_string(expected));
        }
        t.data.resize(static_cast<std::size_t>(expected));
        in.seekg(static_cast<std::streamoff>(data_start + begin));
        in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(expected));
        if (!in) throw IoError(where + ": truncated payload for tensor '" + name + "'");
        out.tensors.push_back(std::move(t));
    }
    if (out.tensors.empty()) out.warnings.push_back(where + " contains no tensors");
    sort_by_name(out.tensors);
    return out;
}

/// Writes tensors in their native dtype; data laid out in name order.
inline void write_container(const std::filesystem::path& path, const NamedTensors& tensors,
                            const std::map<std::string, std::string>& metadata = {}) {
    nlohmann::json header = nlohmann::json::object();
    if (!metadata.empty()) header["__metadata__"] = metadata;

    std::vector<const WeightTensor*> order;
    for (const auto& t : tensors) order.push_back(&t);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->name < b->name; });

    std::uint64_t offset = 0;
    for (const auto* t : order) {
        if (t->data.size() != t->numel() * dtype_size(t->dtype)) {
            throw ConfigError("tensor '" + t->name + "': byte size does not match shape");
        }
        if (header.contains(t->name)) throw ConfigError("duplicate tensor name '" + t->name + "'");
        header[t->name] = {{"dtype", dtype_name(t->dtype)},
                           {"shape", t->shape},
                           {"data_offsets", {offset, offset + t->data.size()}}};
        offset += t->data.size();
    }

    std::string text = header.dump();
    while ((8 + text.size()) % 8 != 0) text.push_back(' ');
    const std::uint64_t len = text.size();

    AtomicFileWriter w(path);
    w.write(std::as_bytes(std::span(&len, 1)));
    w.write(text);
    for (const auto* t : order) w.write(t->data);
    w.commit();
}

}  // namespace benq
