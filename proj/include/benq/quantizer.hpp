#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "fp16.hpp"
#include "levels.hpp"
#include "parallel.hpp"
#include "policy.hpp"
#include "tensor.hpp"

namespace benq {

inline constexpr std::size_t kDefaultGroupSize = 8;
inline constexpr int kDefaultBits = 4;

struct QuantConfig {
    int bits = kDefaultBits;
    std::size_t group_size = kDefaultGroupSize;
    Schedule schedule = Schedule::LogUniform;
    double epsilon = kDefaultEpsilon;

    void validate() const {
        check_bits(bits);
        if (group_size < 1) throw ConfigError("group size must be >= 1");
        if (schedule == Schedule::LogUniform && (!(epsilon > 0.0) || !(epsilon < 1.0))) {
            throw ConfigError("epsilon must be in (0, 1)");
        }
    }

    friend bool operator==(const QuantConfig&, const QuantConfig&) = default;
};

/// Group-quantized tensor. `codes` holds one entry per element in
/// [0, 2^bits): a codebook index, or for UniformRTN the signed integer
/// q offset by 2^(bits-1). Scales are FP16 bit patterns, one per group.
struct QuantizedTensor {
    std::string name;
    std::vector<std::uint64_t> shape;
    std::vector<std::uint8_t> codes;
    std::vector<std::uint16_t> scales;
    QuantConfig config;
    std::size_t tail_len = 0;  // length of the final partial group, 0 if G divides numel

    std::uint64_t numel() const { return shape_numel(shape); }
    std::size_t num_groups() const { return scales.size(); }
    float scale(std::size_t group) const { return half_to_float(scales[group]); }

    /// Signed RTN integer at element k (UniformRTN only).
    int rtn_value(std::size_t k) const { return static_cast<int>(codes[k]) - (1 << (config.bits - 1)); }

    friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

struct GroupResult {
    std::vector<std::uint8_t> indices;
    std::uint16_t scale = 0;  // FP16 bits

    float scale_value() const { return half_to_float(scale); }
};

struct RtnGroupResult {
    std::vector<int> q;
    std::uint16_t scale = 0;  // FP16 bits

    float scale_value() const { return half_to_float(scale); }
};

namespace detail {

template <typename T>
double max_abs_finite(std::span<const T> group) {
    double m = 0.0;
    for (const T& v : group) {
        const double x = static_cast<double>(v);
        if (!std::isfinite(x)) throw DataError("non-finite value in quantization group");
        m = std::max(m, std::abs(x));
    }
    return m;
}

// FP16 scale for a nonnegative magnitude, round-to-nearest-even. Zero stays
// zero. Subnormal results are rounded up instead: their relative error can
// reach 100%, and a scale below the group max would push normalized values
// past the outermost level (and make RTN clamp asymmetrically).
inline std::uint16_t encode_scale(double magnitude) {
    if (magnitude == 0.0) return 0;
    std::uint16_t h = float_to_half(static_cast<float>(magnitude));
    if ((h & 0x7c00u) == 0x7c00u) {
        throw DataError("group scale " + std::to_string(magnitude) + " exceeds the FP16 range");
    }
    if (h < 0x0400u && static_cast<double>(half_to_float(h)) < magnitude) ++h;
    return h;
}

// Round half away from zero.
inline double round_half_away(double x) { return std::copysign(std::floor(std::abs(x) + 0.5), x); }

}  // namespace detail

/// Scale = max|group| (stored FP16), then nearest-level index of group/scale.
/// All-zero groups get scale 0 and the smallest positive level.
template <typename T>
void quantize_group_into(std::span<const T> group, const Codebook& codebook, std::span<std::uint8_t> indices,
                         std::uint16_t& scale) {
    if (group.empty()) throw ConfigError("quantize_group: empty group");
    scale = detail::encode_scale(detail::max_abs_finite(group));
    if (scale == 0) {
        std::fill(indices.begin(), indices.end(), static_cast<std::uint8_t>(codebook.smallest_positive_index()));
        return;
    }
    const double s = static_cast<double>(half_to_float(scale));
    for (std::size_t k = 0; k < group.size(); ++k) {
        indices[k] = static_cast<std::uint8_t>(codebook.nearest(static_cast<double>(group[k]) / s));
    }
}

template <typename T>
GroupResult quantize_group(std::span<const T> group, const Codebook& codebook) {
    GroupResult r;
    r.indices.resize(group.size());
    quantize_group_into(group, codebook, std::span(r.indices), r.scale);
    return r;
}

inline GroupResult quantize_group(const std::vector<float>& group, const Codebook& codebook) {
    return quantize_group(std::span<const float>(group), codebook);
}

/// Uniform RTN: s = max|group| / (2^(B-1) - 1) (stored FP16),
/// q = clamp(round(w / s), -2^(B-1), 2^(B-1) - 1), halves rounded away from zero.
template <typename T>
void rtn_quantize_group_into(std::span<const T> group, int bits, std::span<int> q, std::uint16_t& scale) {
    check_bits(bits);
    if (group.empty()) throw ConfigError("rtn_quantize_group: empty group");
    const int qmax = (1 << (bits - 1)) - 1;
    const int qmin = -(1 << (bits - 1));
    scale = detail::encode_scale(detail::max_abs_finite(group) / qmax);
    if (scale == 0) {
        std::fill(q.begin(), q.end(), 0);
        return;
    }
    const double s = static_cast<double>(half_to_float(scale));
    for (std::size_t k = 0; k < group.size(); ++k) {
        const double r = detail::round_half_away(static_cast<double>(group[k]) / s);
        q[k] = static_cast<int>(std::clamp(r, static_cast<double>(qmin), static_cast<double>(qmax)));
    }
}

template <typename T>
RtnGroupResult rtn_quantize_group(std::span<const T> group, int bits) {
    RtnGroupResult r;
    r.q.resize(group.size());
    rtn_quantize_group_into(group, bits, std::span(r.q), r.scale);
    return r;
}

inline RtnGroupResult rtn_quantize_group(const std::vector<float>& group, int bits) {
    return rtn_quantize_group(std::span<const float>(group), bits);
}

inline std::size_t group_count(std::uint64_t numel, std::size_t group_size) {
    return static_cast<std::size_t>((numel + group_size - 1) / group_size);
}

/// Flattens row-major, splits into contiguous groups of G (last one may be
/// shorter) and quantizes each group.
inline QuantizedTensor quantize_values(std::string name, std::vector<std::uint64_t> shape,
                                       std::span<const float> values, const QuantConfig& config) {
    config.validate();
    if (shape_numel(shape) != values.size()) throw ConfigError("tensor '" + name + "': shape/value mismatch");

    QuantizedTensor qt;
    qt.name = std::move(name);
    qt.shape = std::move(shape);
    qt.config = config;
    const std::size_t n = values.size();
    const std::size_t G = config.group_size;
    qt.tail_len = n % G;
    qt.codes.resize(n);
    qt.scales.resize(group_count(n, G));

    if (config.schedule == Schedule::UniformRTN) {
        const int offset = 1 << (config.bits - 1);
        std::vector<int> q(G);
        for (std::size_t g = 0; g < qt.scales.size(); ++g) {
            const std::size_t begin = g * G;
            const std::size_t len = std::min(G, n - begin);
            rtn_quantize_group_into(values.subspan(begin, len), config.bits, std::span(q).first(len), qt.scales[g]);
            for (std::size_t k = 0; k < len; ++k) qt.codes[begin + k] = static_cast<std::uint8_t>(q[k] + offset);
        }
    } else {
        const Codebook codebook = make_codebook(config.schedule, config.bits, config.epsilon);
        for (std::size_t g = 0; g < qt.scales.size(); ++g) {
            const std::size_t begin = g * G;
            const std::size_t len = std::min(G, n - begin);
            quantize_group_into(values.subspan(begin, len), codebook, std::span(qt.codes).subspan(begin, len),
                                qt.scales[g]);
        }
    }
    return qt;
}

inline QuantizedTensor quantize_tensor(const WeightTensor& tensor, const QuantConfig& config) {
    const auto values = tensor.values();
    return quantize_values(tensor.name, tensor.shape, values, config);
}

namespace detail {

inline void check_codes(const QuantizedTensor& qt) {
    const unsigned limit = 1u << qt.config.bits;
    for (auto c : qt.codes) {
        if (c >= limit) throw CorruptionError("tensor '" + qt.name + "': index out of range for bit width");
    }
    if (qt.codes.size() != qt.numel() || qt.scales.size() != group_count(qt.numel(), qt.config.group_size)) {
        throw CorruptionError("tensor '" + qt.name + "': index/scale count does not match shape");
    }
}

}  // namespace detail

/// reconstructed[k] = levels[index[k]] * scale[group(k)], as FP32.
inline WeightTensor dequantize(const QuantizedTensor& qt, const Codebook& codebook) {
    if (qt.config.schedule == Schedule::UniformRTN) {
        throw ConfigError("tensor '" + qt.name + "' is RTN-quantized; use rtn_dequantize");
    }
    if (codebook.bits() != qt.config.bits || codebook.schedule() != qt.config.schedule ||
        (codebook.schedule() == Schedule::LogUniform && codebook.epsilon() != qt.config.epsilon)) {
        throw ConfigError("tensor '" + qt.name + "': codebook does not match quantization config");
    }
    detail::check_codes(qt);

    const std::size_t G = qt.config.group_size;
    std::vector<float> out(qt.codes.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double s = static_cast<double>(qt.scale(k / G));
        out[k] = static_cast<float>(codebook[qt.codes[k]] * s);
    }
    return WeightTensor::from_values(qt.name, qt.shape, out);
}

/// reconstructed[k] = q[k] * scale[group(k)], as FP32.
inline WeightTensor rtn_dequantize(const QuantizedTensor& qt) {
    if (qt.config.schedule != Schedule::UniformRTN) {
        throw ConfigError("tensor '" + qt.name + "' is codebook-quantized; use dequantize with its codebook");
    }
    detail::check_codes(qt);
    const std::size_t G = qt.config.group_size;
    std::vector<float> out(qt.codes.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = static_cast<float>(qt.rtn_value(k) * static_cast<double>(qt.scale(k / G)));
    }
    return WeightTensor::from_values(qt.name, qt.shape, out);
}

/// Dispatches on the stored schedule.
inline WeightTensor dequantize(const QuantizedTensor& qt) {
    if (qt.config.schedule == Schedule::UniformRTN) return rtn_dequantize(qt);
    return dequantize(qt, make_codebook(qt.config.schedule, qt.config.bits, qt.config.epsilon));
}

// Selective application --------------------------------------------------

using ModelEntry = std::variant<QuantizedTensor, WeightTensor>;

inline const std::string& entry_name(const ModelEntry& e) {
    return std::visit([](const auto& t) -> const std::string& { return t.name; }, e);
}

/// Model after policy application: quantized and preserved tensors, by name.
struct MixedModel {
    QuantConfig config;
    std::string policy_digest;
    std::vector<ModelEntry> entries;

    friend bool operator==(const MixedModel&, const MixedModel&) = default;
};

/// Fixed per-tensor bookkeeping in bytes: tail length, group count and one
/// 8-byte extent per dimension.
inline std::uint64_t tensor_metadata_bytes(std::size_t ndim) { return 16 + 8 * ndim; }

/// Estimated storage in bits: numel * B index bits + 16 bits per group scale + metadata.
inline std::uint64_t estimated_bits(const QuantizedTensor& qt) {
    return qt.numel() * static_cast<std::uint64_t>(qt.config.bits) + 16ull * qt.num_groups() +
           8 * tensor_metadata_bytes(qt.shape.size());
}

inline std::uint64_t native_bits(const WeightTensor& t) { return t.numel() * dtype_size(t.dtype) * 8; }

struct PolicySummary {
    std::size_t n_tensors = 0;
    std::size_t n_quantized = 0;
    std::uint64_t total_params = 0;
    std::uint64_t quantized_params = 0;
    std::uint64_t original_bits = 0;
    std::uint64_t compressed_bits = 0;

    double quantized_fraction() const {
        return total_params ? static_cast<double>(quantized_params) / static_cast<double>(total_params) : 0.0;
    }
    double compression_ratio() const {
        return compressed_bits ? static_cast<double>(original_bits) / static_cast<double>(compressed_bits) : 0.0;
    }
};

struct PolicyResult {
    MixedModel model;
    PolicySummary summary;
};

/// Quantizes the tensors the policy selects; all others are copied verbatim.
inline PolicyResult apply_policy(const NamedTensors& model, const QuantPolicy& policy, const QuantConfig& config,
                                 std::size_t threads = default_thread_count()) {
    if (model.empty()) throw ConfigError("apply_policy: empty model");
    config.validate();

    PolicyResult out;
    out.model.config = config;
    out.model.policy_digest = policy.digest();
    out.model.entries.resize(model.size());

    parallel_for(model.size(), threads, [&](std::size_t i) {
        const WeightTensor& t = model[i];
        if (t.numel() > 0 && policy.should_quantize(t.name)) {
            out.model.entries[i] = quantize_tensor(t, config);
        } else {
            out.model.entries[i] = t;
        }
    });

    std::stable_sort(out.model.entries.begin(), out.model.entries.end(),
                     [](const ModelEntry& a, const ModelEntry& b) { return entry_name(a) < entry_name(b); });

    auto& s = out.summary;
    for (std::size_t i = 0; i < model.size(); ++i) {
        s.total_params += model[i].numel();
        s.original_bits += native_bits(model[i]);
    }
    for (const auto& e : out.model.entries) {
        ++s.n_tensors;
        if (const auto* q = std::get_if<QuantizedTensor>(&e)) {
            ++s.n_quantized;
            s.quantized_params += q->numel();
            s.compressed_bits += estimated_bits(*q);
        } else {
            s.compressed_bits += native_bits(std::get<WeightTensor>(e));
        }
    }
    return out;
}

/// FP32 view of every tensor in a mixed model (quantized ones dequantized).
inline NamedTensors dequantize_model(const MixedModel& model) {
    NamedTensors out;
    out.reserve(model.entries.size());
    for (const auto& e : model.entries) {
        if (const auto* q = std::get_if<QuantizedTensor>(&e)) {
            out.push_back(dequantize(*q));
        } else {
            const auto& t = std::get<WeightTensor>(e);
            out.push_back(WeightTensor::from_values(t.name, t.shape, t.values()));
        }
    }
    return out;
}

}  // namespace benq
