#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace agentsoc {

// 64-bit FNV-1a. Stable across platforms, which is all the scripted backend
// and the manifest digests need.
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64_mix(std::uint64_t h, std::uint64_t v) noexcept {
    for (int i = 0; i < 8; ++i) {
        h ^= static_cast<unsigned char>(v >> (8 * i));
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex_digest(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + buf;
}

inline std::string digest_of(std::string_view data) { return hex_digest(fnv1a64(data)); }

} // namespace agentsoc
