#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace benq {

// Synthetic weight generator.
//
// Element i draws u0..u3 = CounterRng(seed).uniform(4i + 0..3) and maps them:
//   loguniform(D):      |x| = 10^(-D * u0), negative iff u1 < 0.5
//   lognormal(mu, sd):  |x| = exp(mu + sd * z), negative iff u2 < 0.5
//   gaussian(sd):       x = sd * z
//   constant(c):        x = c
//   uniform(lo, hi):    x = lo + (hi - lo) * u0
// with z = sqrt(-2 ln(1 - u0)) * cos(2 pi u1) (Box-Muller). Values are
// computed in double and rounded to FP32.

enum class SynthKind { LogUniformMagnitude, LogNormal, Constant, Gaussian, Uniform };

struct SynthSpec {
    SynthKind kind = SynthKind::LogUniformMagnitude;
    double a = 0.0;  // decades | mu | c | sigma | lo
    double b = 0.0;  // sigma (lognormal) | hi (uniform)
    std::vector<std::uint64_t> shape;

    static SynthSpec log_uniform(double decades, std::uint64_t n) {
        return {SynthKind::LogUniformMagnitude, decades, 0.0, {n}};
    }
    static SynthSpec log_normal(double mu, double sigma, std::uint64_t n) {
        return {SynthKind::LogNormal, mu, sigma, {n}};
    }
    static SynthSpec constant(double c, std::uint64_t n) { return {SynthKind::Constant, c, 0.0, {n}}; }
    static SynthSpec gaussian(double sigma, std::uint64_t n) { return {SynthKind::Gaussian, sigma, 0.0, {n}}; }
    static SynthSpec uniform(double lo, double hi, std::uint64_t n) {
        return {SynthKind::Uniform, lo, hi, {n}};
    }

    /// Parses "loguniform:D:N", "lognormal:MU:SD:N", "constant:C:N",
    /// "gaussian:SD:N" or "uniform:LO:HI:N"; N may be a shape like 64x128.
    static SynthSpec parse(std::string_view text);
};

inline void validate(const SynthSpec& s) {
    auto bad = [](const std::string& why) { throw ConfigError("invalid synth spec: " + why); };
    if (s.shape.empty()) bad("empty shape");
    switch (s.kind) {
        case SynthKind::LogUniformMagnitude:
            if (!(s.a > 0.0) || !std::isfinite(s.a)) bad("decades must be positive");
            break;
        case SynthKind::LogNormal:
            if (!std::isfinite(s.a) || !(s.b >= 0.0) || !std::isfinite(s.b)) bad("lognormal needs finite mu, sigma >= 0");
            break;
        case SynthKind::Constant:
            if (!std::isfinite(s.a)) bad("constant must be finite");
            break;
        case SynthKind::Gaussian:
            if (!(s.a >= 0.0) || !std::isfinite(s.a)) bad("gaussian sigma must be >= 0");
            break;
        case SynthKind::Uniform:
            if (!std::isfinite(s.a) || !std::isfinite(s.b) || !(s.a <= s.b)) bad("uniform needs finite lo <= hi");
            break;
    }
}

inline SynthSpec SynthSpec::parse(std::string_view text) {
    std::vector<std::string> parts;
    {
        std::string cur;
        for (char c : text) {
            if (c == ':') {
                parts.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        parts.push_back(cur);
    }
    auto num = [&](std::size_t i) {
        try {
            std::size_t used = 0;
            const double v = std::stod(parts.at(i), &used);
            if (used != parts[i].size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("invalid synth spec '" + std::string(text) + "': bad number");
        }
    };
    auto dims = [&](std::size_t i) {
        std::vector<std::uint64_t> shape;
        const std::string& text_dims = parts.at(i);
        if (text_dims.empty() || text_dims.back() == 'x') {
            throw ConfigError("invalid synth spec '" + std::string(text) + "': bad shape");
        }
        std::stringstream ss(text_dims);
        std::string d;
        while (std::getline(ss, d, 'x')) {
            try {
                std::size_t used = 0;
                const long long v = std::stoll(d, &used);
                if (used != d.size() || v <= 0) throw std::invalid_argument("dim");
                shape.push_back(static_cast<std::uint64_t>(v));
            } catch (const std::exception&) {
                throw ConfigError("invalid synth spec '" + std::string(text) + "': bad shape");
            }
        }
        return shape;
    };

    const std::string& kind = parts.front();
    SynthSpec s;
    auto need = [&](std::size_t n) {
        if (parts.size() != n) {
            throw ConfigError("invalid synth spec '" + std::string(text) + "': expected " + std::to_string(n - 1) +
                              " fields after '" + kind + "'");
        }
    };
    if (kind == "loguniform") {
        need(3);
        s = {SynthKind::LogUniformMagnitude, num(1), 0.0, dims(2)};
    } else if (kind == "lognormal") {
        need(4);
        s = {SynthKind::LogNormal, num(1), num(2), dims(3)};
    } else if (kind == "constant") {
        need(3);
        s = {SynthKind::Constant, num(1), 0.0, dims(2)};
    } else if (kind == "gaussian") {
        need(3);
        s = {SynthKind::Gaussian, num(1), 0.0, dims(2)};
    } else if (kind == "uniform") {
        need(4);
        s = {SynthKind::Uniform, num(1), num(2), dims(3)};
    } else {
        throw ConfigError("invalid synth spec '" + std::string(text) + "': unknown distribution '" + kind + "'");
    }
    validate(s);
    return s;
}

inline std::vector<float> synth_values(const SynthSpec& spec, std::uint64_t seed) {
    validate(spec);
    const CounterRng rng(seed);
    const std::size_t n = static_cast<std::size_t>(shape_numel(spec.shape));
    std::vector<float> out(n);

    auto normal = [&](std::uint64_t base) {
        const double u0 = rng.uniform(base);
        const double u1 = rng.uniform(base + 1);
        return std::sqrt(-2.0 * std::log(1.0 - u0)) * std::cos(2.0 * std::numbers::pi * u1);
    };

    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t base = 4 * static_cast<std::uint64_t>(i);
        double x = 0.0;
        switch (spec.kind) {
            case SynthKind::LogUniformMagnitude:
                x = std::pow(10.0, -spec.a * rng.uniform(base));
                if (rng.uniform(base + 1) < 0.5) x = -x;
                break;
            case SynthKind::LogNormal:
                x = std::exp(spec.a + spec.b * normal(base));
                if (rng.uniform(base + 2) < 0.5) x = -x;
                break;
            case SynthKind::Constant:
                x = spec.a;
                break;
            case SynthKind::Gaussian:
                x = spec.a * normal(base);
                break;
            case SynthKind::Uniform:
                x = spec.a + (spec.b - spec.a) * rng.uniform(base);
                break;
        }
        out[i] = static_cast<float>(x);
    }
    return out;
}

inline WeightTensor synth_tensor(std::string name, const SynthSpec& spec, std::uint64_t seed) {
    const auto values = synth_values(spec, seed);
    return WeightTensor::from_values(std::move(name), spec.shape, values);
}

}  // namespace benq
