#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "levels.hpp"
#include "parallel.hpp"
#include "policy.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace benq {

namespace detail {

// 10^k for k in [0, 22], all exactly representable in binary64.
inline constexpr std::array<double, 23> kExactPow10 = {
    1e0,  1e1,  1e2,  1e3,  1e4,  1e5,  1e6,  1e7,  1e8,  1e9,  1e10, 1e11,
    1e12, 1e13, 1e14, 1e15, 1e16, 1e17, 1e18, 1e19, 1e20, 1e21, 1e22};

inline double scale_by_pow10(double a, int k) {
    // a * 10^k, multiplying or dividing by exact powers where possible
    while (k > 22) {
        a *= 1e22;
        k -= 22;
    }
    while (k < -22) {
        a /= 1e22;
        k += 22;
    }
    return k >= 0 ? a * kExactPow10[static_cast<std::size_t>(k)] : a / kExactPow10[static_cast<std::size_t>(-k)];
}

}  // namespace detail

/// Leading significant digit of x (sign ignored); nullopt for zero.
inline std::optional<int> first_digit(double x) {
    if (!std::isfinite(x)) throw DataError("first_digit: non-finite value");
    const double a = std::abs(x);
    if (a == 0.0) return std::nullopt;

    const int e = static_cast<int>(std::floor(std::log10(a)));
    // subnormals: lift into the normal range before scaling
    double s = a < 1e-300 ? detail::scale_by_pow10(a * 1e300, -e - 300) : detail::scale_by_pow10(a, -e);
    // log10 can be off by one near exact powers of ten
    if (s >= 10.0) s /= 10.0;
    if (s < 1.0) s *= 10.0;
    int d = static_cast<int>(s);
    return std::clamp(d, 1, 9);
}

struct DigitHistogram {
    std::array<std::uint64_t, 9> counts{};  // counts[d-1] for digits 1..9
    std::uint64_t total = 0;
    std::uint64_t zeros_skipped = 0;

    void add(double x) {
        if (const auto d = first_digit(x)) {
            ++counts[static_cast<std::size_t>(*d - 1)];
            ++total;
        } else {
            ++zeros_skipped;
        }
    }

    std::uint64_t count(int digit) const { return counts.at(static_cast<std::size_t>(digit - 1)); }
    double proportion(int digit) const { return static_cast<double>(count(digit)) / static_cast<double>(total); }

    friend bool operator==(const DigitHistogram&, const DigitHistogram&) = default;
};

template <typename T>
DigitHistogram digit_histogram(std::span<const T> values) {
    DigitHistogram h;
    for (const T& v : values) h.add(static_cast<double>(v));
    return h;
}

inline DigitHistogram digit_histogram(const std::vector<float>& values) {
    return digit_histogram(std::span<const float>(values));
}
inline DigitHistogram digit_histogram(const std::vector<double>& values) {
    return digit_histogram(std::span<const double>(values));
}

/// p_i - b_i for digits 1..9.
inline std::array<double, 9> signed_deviation(const DigitHistogram& hist) {
    if (hist.total == 0) throw UndefinedStatisticError("digit deviation undefined: no nonzero values");
    const auto& ref = BenfordDistribution::reference();
    std::array<double, 9> dev{};
    for (int d = 1; d <= 9; ++d) {
        const auto i = static_cast<std::size_t>(d - 1);
        dev[i] = hist.proportion(d) - ref.probs[i];
    }
    return dev;
}

/// Mean absolute deviation from Benford: (1/9) * sum |p_i - b_i|.
inline double mad_score(const DigitHistogram& hist) {
    if (hist.total == 0) throw UndefinedStatisticError("MAD undefined: histogram has no nonzero values");
    double sum = 0.0;
    for (double d : signed_deviation(hist)) sum += std::abs(d);
    return sum / 9.0;
}

struct SubsampleInfo {
    std::uint64_t seed = 0;
    std::uint64_t sampled = 0;
    std::uint64_t population = 0;
};

struct DigitReport {
    std::string tensor_name;
    Family family = Family::Other;
    DigitHistogram histogram;
    std::optional<double> mad;  // absent when the tensor has no nonzero values
    std::array<double, 9> signed_dev{};
    std::optional<SubsampleInfo> subsample;
};

struct FamilySummary {
    Family family;
    double mean_mad;
    double median_mad;
    std::size_t n_tensors;
};

struct ModelReport {
    std::vector<DigitReport> per_tensor;  // descending MAD, absent MAD last
    std::vector<FamilySummary> per_family;  // family enum order, families without scored tensors omitted
};

struct AnalyzeOptions {
    std::uint64_t subsample_threshold = 50'000'000;
    std::uint64_t subsample_size = 10'000'000;
    std::uint64_t seed = 0;
    std::size_t threads = default_thread_count();
};

inline DigitReport tensor_report(const WeightTensor& tensor, const QuantPolicy& policy,
                                 const AnalyzeOptions& opts = {}) {
    DigitReport r;
    r.tensor_name = tensor.name;
    r.family = classify_family(tensor.name, policy);

    const auto values = tensor.values();
    const std::uint64_t n = values.size();
    if (n > opts.subsample_threshold && opts.subsample_size < n) {
        // uniform sampling with replacement, stream keyed by seed
        const CounterRng rng(opts.seed);
        for (std::uint64_t k = 0; k < opts.subsample_size; ++k) {
            const auto idx = static_cast<std::size_t>(rng.uniform(k) * static_cast<double>(n));
            r.histogram.add(values[std::min<std::size_t>(idx, n - 1)]);
        }
        r.subsample = SubsampleInfo{opts.seed, opts.subsample_size, n};
    } else {
        r.histogram = digit_histogram(values);
    }

    if (r.histogram.total > 0) {
        r.signed_dev = signed_deviation(r.histogram);
        r.mad = mad_score(r.histogram);
    }
    return r;
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline ModelReport model_report(const NamedTensors& tensors, const QuantPolicy& policy,
                                const AnalyzeOptions& opts = {}) {
    if (tensors.empty()) throw ConfigError("model_report: no tensors");

    ModelReport out;
    out.per_tensor.resize(tensors.size());
    parallel_for(tensors.size(), opts.threads,
                 [&](std::size_t i) { out.per_tensor[i] = tensor_report(tensors[i], policy, opts); });

    std::stable_sort(out.per_tensor.begin(), out.per_tensor.end(), [](const DigitReport& a, const DigitReport& b) {
        if (a.mad.has_value() != b.mad.has_value()) return a.mad.has_value();
        if (a.mad && *a.mad != *b.mad) return *a.mad > *b.mad;
        return a.tensor_name < b.tensor_name;
    });

    for (Family f : kAllFamilies) {
        std::vector<double> mads;
        for (const auto& r : out.per_tensor) {
            if (r.family == f && r.mad) mads.push_back(*r.mad);
        }
        if (mads.empty()) continue;
        double sum = 0.0;
        for (double m : mads) sum += m;
        out.per_family.push_back({f, sum / static_cast<double>(mads.size()), median_of(mads), mads.size()});
    }
    return out;
}

}  // namespace benq
