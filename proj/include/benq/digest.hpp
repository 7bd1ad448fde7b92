#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>

namespace benq {

// FNV-1a 64-bit. Used for integrity checks and run manifests, not security.
class Fnv1a64 {
public:
    void update(std::span<const std::byte> bytes) {
        for (auto b : bytes) {
            state_ ^= static_cast<std::uint64_t>(b);
            state_ *= 0x100000001b3ull;
        }
    }
    void update(std::string_view s) { update(std::as_bytes(std::span(s.data(), s.size()))); }

    std::uint64_t value() const { return state_; }

    std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
        return buf;
    }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ull;
};

inline std::string fnv1a64_hex(std::string_view s) {
    Fnv1a64 h;
    h.update(s);
    return h.hex();
}

}  // namespace benq
