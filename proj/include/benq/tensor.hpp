#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "fp16.hpp"

namespace benq {

static_assert(std::endian::native == std::endian::little, "benq assumes a little-endian host");

enum class DType { F32, F16, BF16 };

inline std::string_view dtype_name(DType t) {
    switch (t) {
        case DType::F32: return "F32";
        case DType::F16: return "F16";
        case DType::BF16: return "BF16";
    }
    return "?";
}

inline DType parse_dtype(std::string_view s) {
    if (s == "F32") return DType::F32;
    if (s == "F16") return DType::F16;
    if (s == "BF16") return DType::BF16;
    throw IoError("unsupported dtype '" + std::string(s) + "' (supported: F32, F16, BF16)");
}

inline std::size_t dtype_size(DType t) { return t == DType::F32 ? 4 : 2; }

inline std::uint64_t shape_numel(std::span<const std::uint64_t> shape) {
    return std::accumulate(shape.begin(), shape.end(), std::uint64_t{1}, std::multiplies<>{});
}

/// A named floating-point tensor in its native byte representation.
///
/// The raw bytes are kept so that tensors passed through untouched stay
/// byte-identical; `values()` promotes to FP32 on demand.
struct WeightTensor {
    std::string name;
    std::vector<std::uint64_t> shape;
    DType dtype = DType::F32;
    std::vector<std::byte> data;

    std::uint64_t numel() const { return shape_numel(shape); }

    std::vector<float> values() const {
        const std::size_t n = static_cast<std::size_t>(numel());
        std::vector<float> out(n);
        switch (dtype) {
            case DType::F32:
                std::memcpy(out.data(), data.data(), n * 4);
                break;
            case DType::F16:
                for (std::size_t i = 0; i < n; ++i) out[i] = half_to_float(load_u16(i));
                break;
            case DType::BF16:
                for (std::size_t i = 0; i < n; ++i) out[i] = bf16_to_float(load_u16(i));
                break;
        }
        return out;
    }

    static WeightTensor from_values(std::string name, std::vector<std::uint64_t> shape,
                                    std::span<const float> values) {
        if (shape_numel(shape) != values.size()) {
            throw ConfigError("tensor '" + name + "': shape does not match value count");
        }
        WeightTensor t{std::move(name), std::move(shape), DType::F32, {}};
        t.data.resize(values.size() * 4);
        std::memcpy(t.data.data(), values.data(), t.data.size());
        return t;
    }

    /// Stores values as FP16 (round-to-nearest-even).
    static WeightTensor from_values_f16(std::string name, std::vector<std::uint64_t> shape,
                                        std::span<const float> values) {
        if (shape_numel(shape) != values.size()) {
            throw ConfigError("tensor '" + name + "': shape does not match value count");
        }
        WeightTensor t{std::move(name), std::move(shape), DType::F16, {}};
        t.data.resize(values.size() * 2);
        for (std::size_t i = 0; i < values.size(); ++i) {
            const std::uint16_t h = float_to_half(values[i]);
            std::memcpy(t.data.data() + 2 * i, &h, 2);
        }
        return t;
    }

    friend bool operator==(const WeightTensor&, const WeightTensor&) = default;

private:
    std::uint16_t load_u16(std::size_t i) const {
        std::uint16_t v;
        std::memcpy(&v, data.data() + 2 * i, 2);
        return v;
    }
};

/// Tensors of one model, kept sorted by name.
using NamedTensors = std::vector<WeightTensor>;

inline void sort_by_name(NamedTensors& tensors) {
    std::sort(tensors.begin(), tensors.end(),
              [](const WeightTensor& a, const WeightTensor& b) { return a.name < b.name; });
}

}  // namespace benq
