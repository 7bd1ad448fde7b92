#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace benq {

enum class Schedule { LogUniform, LinearNonUniform, UniformRTN };

inline constexpr double kDefaultEpsilon = 1e-7;
inline constexpr int kMinBits = 2;
inline constexpr int kMaxBits = 8;

inline std::string_view schedule_name(Schedule s) {
    switch (s) {
        case Schedule::LogUniform: return "log";
        case Schedule::LinearNonUniform: return "linear";
        case Schedule::UniformRTN: return "rtn";
    }
    return "?";
}

inline Schedule parse_schedule(std::string_view name) {
    if (name == "log" || name == "log-uniform" || name == "LogUniform") return Schedule::LogUniform;
    if (name == "linear" || name == "LinearNonUniform") return Schedule::LinearNonUniform;
    if (name == "rtn" || name == "uniform" || name == "UniformRTN") return Schedule::UniformRTN;
    throw ConfigError("unknown schedule '" + std::string(name) + "' (expected log, linear or rtn)");
}

inline void check_bits(int bits) {
    if (bits < kMinBits || bits > kMaxBits) {
        throw ConfigError("bits must be in [2, 8], got " + std::to_string(bits));
    }
}

/// Symmetric, zero-free quantization grid in [-1, 1], stored ascending.
///
/// Immutable once built; share freely across threads.
class Codebook {
public:
    int bits() const { return bits_; }
    Schedule schedule() const { return schedule_; }
    /// Smallest positive level for log-uniform grids; unused (0) for linear ones.
    double epsilon() const { return epsilon_; }
    std::span<const double> levels() const { return levels_; }
    std::size_t size() const { return levels_.size(); }
    double operator[](std::size_t i) const { return levels_[i]; }

    /// Index of the smallest-magnitude positive level.
    std::size_t smallest_positive_index() const { return levels_.size() / 2; }

    /// Mirror index under negation: levels[i] == -levels[mirror(i)].
    std::size_t mirror(std::size_t i) const { return levels_.size() - 1 - i; }

    /// Nearest level to y; exact ties resolve to the lower index.
    std::size_t nearest(double y) const {
        const auto first = levels_.begin();
        const auto it = std::lower_bound(first, levels_.end(), y);
        std::size_t best;
        if (it == levels_.end()) {
            best = levels_.size() - 1;
        } else if (it == first) {
            best = 0;
        } else {
            const std::size_t hi = static_cast<std::size_t>(it - first);
            best = std::abs(y - levels_[hi - 1]) <= std::abs(y - levels_[hi]) ? hi - 1 : hi;
        }
        // rounded distances can collide; keep the first minimum like a linear scan would
        while (best > 0 && std::abs(y - levels_[best - 1]) == std::abs(y - levels_[best])) --best;
        return best;
    }

    /// Half the larger gap to the neighbouring levels of level i. Bounds the
    /// normalized rounding error of any value mapped to i within [-1, 1].
    double half_gap(std::size_t i) const {
        double gap = 0.0;
        if (i > 0) gap = std::max(gap, levels_[i] - levels_[i - 1]);
        if (i + 1 < levels_.size()) gap = std::max(gap, levels_[i + 1] - levels_[i]);
        return gap / 2.0;
    }

    friend Codebook generate_log_uniform_levels(int bits, double epsilon);
    friend Codebook generate_linear_levels(int bits);

private:
    Codebook(int bits, Schedule schedule, double epsilon, const std::vector<double>& positive)
        : bits_(bits), schedule_(schedule), epsilon_(epsilon) {
        levels_.reserve(positive.size() * 2);
        for (auto it = positive.rbegin(); it != positive.rend(); ++it) levels_.push_back(-*it);
        levels_.insert(levels_.end(), positive.begin(), positive.end());
    }

    int bits_;
    Schedule schedule_;
    double epsilon_;
    std::vector<double> levels_;
};

/// Positive levels exp(log(eps) + i * (log(1) - log(eps)) / (2^(B-1) - 1)),
/// i = 0 .. 2^(B-1)-1, mirrored to negatives.
inline Codebook generate_log_uniform_levels(int bits, double epsilon = kDefaultEpsilon) {
    check_bits(bits);
    if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
        throw ConfigError("epsilon must be in (0, 1), got " + std::to_string(epsilon));
    }
    const std::size_t n = std::size_t{1} << (bits - 1);
    const double lo = std::log(epsilon);
    const double step = (std::log(1.0) - lo) / static_cast<double>(n - 1);

    std::vector<double> positive(n);
    for (std::size_t i = 0; i < n; ++i) {
        positive[i] = std::exp(lo + static_cast<double>(i) * step);
    }
    // pin the endpoints; exp(log(eps)) can be off by an ulp
    positive.front() = epsilon;
    positive.back() = 1.0;
    return Codebook(bits, Schedule::LogUniform, epsilon, positive);
}

/// Positive levels k / N+ for k = 1 .. N+, N+ = 2^(B-1).
inline Codebook generate_linear_levels(int bits) {
    check_bits(bits);
    const std::size_t n = std::size_t{1} << (bits - 1);
    std::vector<double> positive(n);
    for (std::size_t k = 1; k <= n; ++k) {
        positive[k - 1] = static_cast<double>(k) / static_cast<double>(n);
    }
    return Codebook(bits, Schedule::LinearNonUniform, 0.0, positive);
}

inline Codebook make_codebook(Schedule schedule, int bits, double epsilon = kDefaultEpsilon) {
    switch (schedule) {
        case Schedule::LogUniform: return generate_log_uniform_levels(bits, epsilon);
        case Schedule::LinearNonUniform: return generate_linear_levels(bits);
        case Schedule::UniformRTN: break;
    }
    throw ConfigError("uniform RTN has no codebook");
}

// Benford reference ------------------------------------------------------

/// P(first significant digit = d) = log10(1 + 1/d).
inline double benford_probability(int d) {
    if (d < 1 || d > 9) throw DomainError("digit must be in 1..9, got " + std::to_string(d));
    return std::log10(1.0 + 1.0 / static_cast<double>(d));
}

struct BenfordDistribution {
    std::array<double, 9> probs;  // probs[d-1] for digits 1..9

    static const BenfordDistribution& reference() {
        static const BenfordDistribution dist = [] {
            BenfordDistribution b{};
            for (int d = 1; d <= 9; ++d) b.probs[static_cast<std::size_t>(d - 1)] = benford_probability(d);
            return b;
        }();
        return dist;
    }
};

}  // namespace benq
