#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace genread {

/// Hex-encoded SHA-256 digest (64 lowercase hex chars).
std::string sha256_hex(std::string_view data);

/// First 8 bytes of SHA-256(data), big-endian, as a 64-bit seed.
std::uint64_t sha256_seed(std::string_view data);

}  // namespace genread
