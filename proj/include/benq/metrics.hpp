#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "quantizer.hpp"
#include "tensor.hpp"

namespace benq {

/// Pairwise (cascade) sum of f(0) .. f(n-1). The reduction tree depends only
/// on n, so results are reproducible however the caller splits work.
template <typename F>
double pairwise_sum(std::size_t begin, std::size_t end, const F& f) {
    constexpr std::size_t kLeaf = 64;
    if (end - begin <= kLeaf) {
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += f(i);
        return s;
    }
    const std::size_t mid = begin + (end - begin) / 2;
    return pairwise_sum(begin, mid, f) + pairwise_sum(mid, end, f);
}

struct DistortionReport {
    std::string tensor_name;
    double mse = 0.0;
    double max_abs_err = 0.0;
    double rel_fro_err = 0.0;  // ||W - W~||_F / ||W||_F; 0 for an all-zero original reproduced exactly
    Schedule schedule = Schedule::LogUniform;
    int bits = 0;
    std::size_t group_size = 0;
};

inline DistortionReport distortion(std::span<const float> original, std::span<const float> reconstructed) {
    if (original.size() != reconstructed.size()) throw ConfigError("distortion: size mismatch");
    DistortionReport r;
    const std::size_t n = original.size();
    if (n == 0) return r;

    auto err = [&](std::size_t i) {
        return static_cast<double>(original[i]) - static_cast<double>(reconstructed[i]);
    };
    const double sse = pairwise_sum(0, n, [&](std::size_t i) { return err(i) * err(i); });
    const double ref = pairwise_sum(0, n, [&](std::size_t i) {
        const double x = static_cast<double>(original[i]);
        return x * x;
    });
    for (std::size_t i = 0; i < n; ++i) r.max_abs_err = std::max(r.max_abs_err, std::abs(err(i)));

    r.mse = sse / static_cast<double>(n);
    if (ref > 0.0) {
        r.rel_fro_err = std::sqrt(sse / ref);
    } else {
        r.rel_fro_err = sse > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    return r;
}

inline DistortionReport distortion(const WeightTensor& original, const WeightTensor& reconstructed) {
    if (original.shape != reconstructed.shape) {
        throw ConfigError("distortion: shape mismatch for '" + original.name + "'");
    }
    const auto a = original.values();
    const auto b = reconstructed.values();
    auto r = distortion(std::span<const float>(a), std::span<const float>(b));
    r.tensor_name = original.name;
    return r;
}

/// Quantize/dequantize the same tensor under each config; one row per config,
/// in the given order.
inline std::vector<DistortionReport> compare_schedules(const WeightTensor& tensor,
                                                       const std::vector<QuantConfig>& configs) {
    if (configs.empty()) throw ConfigError("compare_schedules: no configs");
    const auto values = tensor.values();
    std::vector<DistortionReport> rows;
    rows.reserve(configs.size());
    for (const auto& cfg : configs) {
        const auto qt = quantize_values(tensor.name, tensor.shape, values, cfg);
        const auto recon = dequantize(qt).values();
        auto r = distortion(std::span<const float>(values), std::span<const float>(recon));
        r.tensor_name = tensor.name;
        r.schedule = cfg.schedule;
        r.bits = cfg.bits;
        r.group_size = cfg.group_size;
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace benq
