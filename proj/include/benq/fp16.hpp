#pragma once

#include <bit>
#include <cmath>
#include <cstdint>

namespace benq {

// IEEE binary16 <-> binary32 and bfloat16 -> binary32 conversions.

inline float half_to_float(std::uint16_t h) {
    const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
    const std::uint32_t exp = (h >> 10) & 0x1fu;
    std::uint32_t mant = h & 0x3ffu;

    if (exp == 0) {
        if (mant == 0) return std::bit_cast<float>(sign);
        // subnormal: value = mant * 2^-24, exact in binary32
        const float v = static_cast<float>(mant) * 0x1p-24f;
        return sign ? -v : v;
    }
    if (exp == 0x1f) {
        return std::bit_cast<float>(sign | 0x7f800000u | (mant << 13));
    }
    return std::bit_cast<float>(sign | ((exp + 112u) << 23) | (mant << 13));
}

// Round-to-nearest-even. Values beyond the binary16 range become +-inf.
inline std::uint16_t float_to_half(float f) {
    const std::uint32_t x = std::bit_cast<std::uint32_t>(f);
    const std::uint16_t sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
    const std::uint32_t exp = (x >> 23) & 0xffu;
    const std::uint32_t mant = x & 0x7fffffu;

    if (exp == 0xff) {
        if (mant == 0) return sign | 0x7c00u;
        return static_cast<std::uint16_t>(sign | 0x7e00u | (mant >> 13));
    }

    const int e = static_cast<int>(exp) - 127;
    if (e > 15) return sign | 0x7c00u;

    if (e >= -14) {
        // normal range
        std::uint32_t h = (static_cast<std::uint32_t>(e + 15) << 10) | (mant >> 13);
        const std::uint32_t rem = mant & 0x1fffu;
        if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;  // may carry into exponent/inf
        return static_cast<std::uint16_t>(sign | h);
    }

    if (e < -25) return sign;

    // subnormal half: value = m * 2^-24 with m < 1024
    const std::uint32_t full = mant | 0x800000u;  // 24-bit significand
    const int shift = -e - 1;
    // full * 2^(e-23) = m * 2^-24  =>  m = full >> (-e - 1)
    std::uint32_t m = full >> shift;
    const std::uint32_t rem = full & ((1u << shift) - 1u);
    const std::uint32_t halfway = 1u << (shift - 1);
    if (rem > halfway || (rem == halfway && (m & 1u))) ++m;
    return static_cast<std::uint16_t>(sign | m);
}

inline float round_to_half(float f) { return half_to_float(float_to_half(f)); }

inline float bf16_to_float(std::uint16_t b) {
    return std::bit_cast<float>(static_cast<std::uint32_t>(b) << 16);
}

inline constexpr float kHalfMax = 65504.0f;
inline constexpr std::uint16_t kHalfMinSubnormal = 0x0001u;

}  // namespace benq
