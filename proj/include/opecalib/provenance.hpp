#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace opecalib {

// Stamped into every output file written by the experiment runner.
struct Provenance {
    std::string config_hash;
    std::uint64_t seed = 0;
};

// 64-bit FNV-1a, hex encoded.
inline std::string content_hash(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17] = {};
    auto [end, ec] = std::to_chars(buf, buf + 16, h, 16);
    std::string hex(buf, end);
    return std::string(16 - hex.size(), '0') + hex;
}

// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

// CSV comment line carrying provenance; empty when none is attached.
inline std::string provenance_comment(const std::optional<Provenance>& p) {
    if (!p) return {};
    return "# config_hash=" + p->config_hash + " seed=" + std::to_string(p->seed) + "\n";
}

}  // namespace opecalib
