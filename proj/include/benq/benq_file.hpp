#pragma once

// .benq: packed group-quantized model.
//
//   offset 0   "BNQ1"
//   offset 4   u32 reserved, must be 0
//   offset 8   u64 header length N
//   offset 16  N bytes of JSON header, space-padded so the payload starts
//              on an 8-byte boundary
//   16 + N     payload
//
// All integers little-endian. Every payload region starts at an 8-byte
// aligned offset (relative to the payload start, zero-filled gaps).
// Quantized tensors store packed indices, then FP16 scales. Indices for
// bits <= 4 are packed two per byte, low nibble first; 5..8 bits use one
// byte each. Preserved tensors are stored raw with their dtype tag.
//
// The header carries "header_digest" (FNV-1a 64 over the header serialized
// without that key) and "payload_digest"; readers reject any mismatch before
// returning data.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "digest.hpp"
#include "error.hpp"
#include "file_util.hpp"
#include "quantizer.hpp"
#include "tensor.hpp"

namespace benq {

inline constexpr std::array<char, 4> kBenqMagic = {'B', 'N', 'Q', '1'};
inline constexpr int kBenqVersion = 1;
inline constexpr std::uint64_t kMaxBenqHeader = 256ull << 20;

/// Bits each index occupies on disk.
inline int packed_index_bits(int bits) { return bits <= 4 ? 4 : 8; }

inline std::size_t packed_index_bytes(std::size_t count, int bits) {
    return bits <= 4 ? (count + 1) / 2 : count;
}

inline std::vector<std::byte> pack_indices(std::span<const std::uint8_t> codes, int bits) {
    check_bits(bits);
    std::vector<std::byte> out(packed_index_bytes(codes.size(), bits));
    if (bits <= 4) {
        for (std::size_t i = 0; i < codes.size(); ++i) {
            const auto nibble = static_cast<std::uint8_t>(codes[i] & 0x0f);
            out[i / 2] |= std::byte{static_cast<std::uint8_t>(i % 2 ? nibble << 4 : nibble)};
        }
    } else {
        std::memcpy(out.data(), codes.data(), codes.size());
    }
    return out;
}

/// Inverse of pack_indices; rejects codes outside [0, 2^bits) and a nonzero
/// unused high nibble.
inline std::vector<std::uint8_t> unpack_indices(std::span<const std::byte> packed, std::size_t count, int bits) {
    check_bits(bits);
    if (packed.size() != packed_index_bytes(count, bits)) throw CorruptionError("packed index size mismatch");
    std::vector<std::uint8_t> codes(count);
    const unsigned limit = 1u << bits;
    if (bits <= 4) {
        for (std::size_t i = 0; i < count; ++i) {
            const auto byte = std::to_integer<std::uint8_t>(packed[i / 2]);
            codes[i] = i % 2 ? byte >> 4 : byte & 0x0f;
        }
        if (count % 2 && (std::to_integer<std::uint8_t>(packed.back()) >> 4) != 0) {
            throw CorruptionError("nonzero padding nibble in packed indices");
        }
    } else {
        std::memcpy(codes.data(), packed.data(), count);
    }
    for (auto c : codes) {
        if (c >= limit) throw CorruptionError("packed index out of range for " + std::to_string(bits) + "-bit codes");
    }
    return codes;
}

namespace detail {

inline std::uint64_t align8(std::uint64_t x) { return (x + 7) & ~std::uint64_t{7}; }

inline nlohmann::json extent(std::uint64_t off, std::uint64_t len) { return nlohmann::json::array({off, len}); }

struct Region {
    std::uint64_t offset;
    std::vector<std::byte> bytes;
};

}  // namespace detail

/// Serialized header text (without padding) and payload regions for a model.
struct BenqLayout {
    nlohmann::json header;
    std::vector<detail::Region> regions;
    std::uint64_t payload_size = 0;
};

inline BenqLayout layout_benq(const MixedModel& model) {
    model.config.validate();
    BenqLayout out;
    nlohmann::json entries = nlohmann::json::array();
    std::uint64_t cursor = 0;
    auto place = [&](std::vector<std::byte> bytes) {
        cursor = detail::align8(cursor);
        const std::uint64_t off = cursor;
        cursor += bytes.size();
        out.regions.push_back({off, std::move(bytes)});
        return detail::extent(off, out.regions.back().bytes.size());
    };

    std::string prev;
    for (std::size_t i = 0; i < model.entries.size(); ++i) {
        const auto& e = model.entries[i];
        const auto& name = entry_name(e);
        if (i > 0 && !(prev < name)) throw ConfigError("model entries must be sorted by unique name ('" + name + "')");
        prev = name;

        if (const auto* q = std::get_if<QuantizedTensor>(&e)) {
            if (!(q->config == model.config)) {
                throw ConfigError("tensor '" + q->name + "' was quantized with a different config than the model");
            }
            detail::check_codes(*q);
            nlohmann::json j = {{"name", q->name}, {"shape", q->shape}, {"quantized", true},
                                {"tail_len", q->tail_len}, {"num_groups", q->num_groups()}};
            j["indices"] = place(pack_indices(q->codes, q->config.bits));
            std::vector<std::byte> scales(q->scales.size() * 2);
            std::memcpy(scales.data(), q->scales.data(), scales.size());
            j["scales"] = place(std::move(scales));
            entries.push_back(std::move(j));
        } else {
            const auto& t = std::get<WeightTensor>(e);
            if (t.data.size() != t.numel() * dtype_size(t.dtype)) {
                throw ConfigError("tensor '" + t.name + "': byte size does not match shape");
            }
            nlohmann::json j = {{"name", t.name}, {"shape", t.shape}, {"quantized", false},
                                {"dtype", dtype_name(t.dtype)}};
            j["data"] = place(t.data);
            entries.push_back(std::move(j));
        }
    }
    out.payload_size = cursor;

    Fnv1a64 payload_digest;
    std::uint64_t pos = 0;
    static constexpr std::array<std::byte, 8> kPad{};
    for (const auto& r : out.regions) {
        payload_digest.update(std::span(kPad).first(static_cast<std::size_t>(r.offset - pos)));
        payload_digest.update(r.bytes);
        pos = r.offset + r.bytes.size();
    }

    out.header = {{"format", "benq"},
                  {"version", kBenqVersion},
                  {"bits", model.config.bits},
                  {"group_size", model.config.group_size},
                  {"schedule", schedule_name(model.config.schedule)},
                  {"epsilon", model.config.epsilon},
                  {"policy_digest", model.policy_digest},
                  {"payload_size", out.payload_size},
                  {"payload_digest", payload_digest.hex()},
                  {"tensors", std::move(entries)}};
    out.header["header_digest"] = fnv1a64_hex(out.header.dump());
    return out;
}

inline void write_benq(const MixedModel& model, const std::filesystem::path& path) {
    const BenqLayout layout = layout_benq(model);
    std::string text = layout.header.dump();
    while ((16 + text.size()) % 8 != 0) text.push_back(' ');
    const std::uint64_t header_len = text.size();
    const std::uint32_t reserved = 0;

    AtomicFileWriter w(path);
    w.write(std::as_bytes(std::span(kBenqMagic)));
    w.write(std::as_bytes(std::span(&reserved, 1)));
    w.write(std::as_bytes(std::span(&header_len, 1)));
    w.write(text);
    std::uint64_t pos = 0;
    for (const auto& r : layout.regions) {
        w.zeros(static_cast<std::size_t>(r.offset - pos));
        w.write(r.bytes);
        pos = r.offset + r.bytes.size();
    }
    w.commit();
}

namespace detail {

inline std::pair<std::uint64_t, std::uint64_t> read_extent(const nlohmann::json& j, std::uint64_t payload_size,
                                                           const std::string& what) {
    const auto v = j.get<std::vector<std::uint64_t>>();
    if (v.size() != 2) throw CorruptionError(what + ": extent must be [offset, length]");
    if (v[0] % 8 != 0) throw CorruptionError(what + ": offset not 8-byte aligned");
    if (v[0] > payload_size || v[1] > payload_size - v[0]) throw CorruptionError(what + ": extent outside payload");
    return {v[0], v[1]};
}

}  // namespace detail

inline MixedModel read_benq(const std::filesystem::path& path) {
    const std::string where = "'" + path.string() + "'";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + where);
    std::error_code ec;
    const std::uint64_t file_size = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("cannot stat " + where + ": " + ec.message());
    if (file_size < 16) throw CorruptionError(where + ": truncated .benq prefix");

    std::array<char, 4> magic{};
    std::uint32_t reserved = 0;
    std::uint64_t header_len = 0;
    in.read(magic.data(), 4);
    in.read(reinterpret_cast<char*>(&reserved), 4);
    in.read(reinterpret_cast<char*>(&header_len), 8);
    if (magic != kBenqMagic) throw IoError(where + " is not a .benq file (bad magic)");
    if (reserved != 0) throw CorruptionError(where + ": reserved field is nonzero");
    if (header_len > kMaxBenqHeader || header_len > file_size - 16 || (16 + header_len) % 8 != 0) {
        throw CorruptionError(where + ": header length out of bounds");
    }
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw CorruptionError(where + ": truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError(where + ": malformed header: " + e.what());
    }

    MixedModel model;
    std::string payload_digest;
    std::uint64_t payload_size = 0;
    try {
        if (!header.is_object() || header.value("format", "") != "benq") {
            throw CorruptionError(where + ": header is not a benq header");
        }
        const std::string stored = header.at("header_digest").get<std::string>();
        nlohmann::json unsigned_header = header;
        unsigned_header.erase("header_digest");
        if (fnv1a64_hex(unsigned_header.dump()) != stored) {
            throw CorruptionError(where + ": header digest mismatch (header was modified or corrupted)");
        }
        const int version = header.at("version").get<int>();
        if (version != kBenqVersion) {
            throw IoError(where + ": unsupported .benq version " + std::to_string(version) + " (this build reads " +
                          std::to_string(kBenqVersion) + ")");
        }
        model.config.bits = header.at("bits").get<int>();
        model.config.group_size = header.at("group_size").get<std::size_t>();
        model.config.schedule = parse_schedule(header.at("schedule").get<std::string>());
        model.config.epsilon = header.at("epsilon").get<double>();
        model.config.validate();
        model.policy_digest = header.at("policy_digest").get<std::string>();
        payload_size = header.at("payload_size").get<std::uint64_t>();
        payload_digest = header.at("payload_digest").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError(where + ": malformed header: " + e.what());
    } catch (const ConfigError& e) {
        throw CorruptionError(where + ": invalid config in header: " + e.what());
    }
    const std::uint64_t payload_start = 16 + header_len;
    if (payload_size != file_size - payload_start) {
        throw CorruptionError(where + ": payload size does not match file size (truncated?)");
    }

    // Read regions in file order, hashing every payload byte including gaps.
    Fnv1a64 digest;
    std::uint64_t pos = 0;
    auto read_region = [&](std::uint64_t off, std::uint64_t len, const std::string& what) {
        if (off < pos) throw CorruptionError(where + ": " + what + " overlaps a previous region");
        std::vector<std::byte> gap(static_cast<std::size_t>(off - pos));
        in.read(reinterpret_cast<char*>(gap.data()), static_cast<std::streamsize>(gap.size()));
        digest.update(gap);
        std::vector<std::byte> bytes(static_cast<std::size_t>(len));
        in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(len));
        if (!in) throw CorruptionError(where + ": truncated payload in " + what);
        digest.update(bytes);
        pos = off + len;
        return bytes;
    };

    try {
        std::string prev;
        for (const auto& j : header.at("tensors")) {
            const std::string name = j.at("name").get<std::string>();
            if (!model.entries.empty() && !(prev < name)) {
                throw CorruptionError(where + ": tensor directory not sorted by unique name");
            }
            prev = name;
            auto shape = j.at("shape").get<std::vector<std::uint64_t>>();
            const std::uint64_t numel = shape_numel(shape);
            const std::string what = "tensor '" + name + "'";

            if (j.at("quantized").get<bool>()) {
                QuantizedTensor q;
                q.name = name;
                q.shape = std::move(shape);
                q.config = model.config;
                q.tail_len = j.at("tail_len").get<std::size_t>();
                const std::size_t groups = j.at("num_groups").get<std::size_t>();
                if (groups != group_count(numel, model.config.group_size) ||
                    q.tail_len != numel % model.config.group_size) {
                    throw CorruptionError(where + ": " + what + " group layout inconsistent with header");
                }
                const auto [ioff, ilen] = detail::read_extent(j.at("indices"), payload_size, what);
                const auto [soff, slen] = detail::read_extent(j.at("scales"), payload_size, what);
                if (ilen != packed_index_bytes(static_cast<std::size_t>(numel), model.config.bits) ||
                    slen != 2 * groups) {
                    throw CorruptionError(where + ": " + what + " region sizes inconsistent with header");
                }
                const auto packed = read_region(ioff, ilen, what);
                q.codes = unpack_indices(packed, static_cast<std::size_t>(numel), model.config.bits);
                const auto scale_bytes = read_region(soff, slen, what);
                q.scales.resize(groups);
                std::memcpy(q.scales.data(), scale_bytes.data(), scale_bytes.size());
                model.entries.emplace_back(std::move(q));
            } else {
                WeightTensor t;
                t.name = name;
                t.shape = std::move(shape);
                try {
                    t.dtype = parse_dtype(j.at("dtype").get<std::string>());
                } catch (const IoError& e) {
                    throw CorruptionError(where + ": " + what + ": " + e.what());
                }
                const auto [off, len] = detail::read_extent(j.at("data"), payload_size, what);
                if (len != numel * dtype_size(t.dtype)) {
                    throw CorruptionError(where + ": " + what + " data size inconsistent with shape");
                }
                t.data = read_region(off, len, what);
                model.entries.emplace_back(std::move(t));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError(where + ": malformed tensor directory: " + e.what());
    } catch (const ConfigError& e) {
        throw CorruptionError(where + ": " + e.what());
    }
    if (pos < payload_size) {
        std::vector<std::byte> rest(static_cast<std::size_t>(payload_size - pos));
        in.read(reinterpret_cast<char*>(rest.data()), static_cast<std::streamsize>(rest.size()));
        digest.update(rest);
    }
    if (digest.hex() != payload_digest) throw CorruptionError(where + ": payload digest mismatch");
    return model;
}

}  // namespace benq
