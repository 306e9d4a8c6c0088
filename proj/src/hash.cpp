#include "genread/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace genread {

static std::array<unsigned char, 32> sha256_raw(std::string_view data) {
    std::array<unsigned char, 32> out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != out.size()) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    return out;
}

std::string sha256_hex(std::string_view data) {
    static const char* digits = "0123456789abcdef";
    auto raw = sha256_raw(data);
    std::string hex;
    hex.reserve(64);
    for (unsigned char byte : raw) {
        hex.push_back(digits[byte >> 4]);
        hex.push_back(digits[byte & 0x0f]);
    }
    return hex;
}

std::uint64_t sha256_seed(std::string_view data) {
    auto raw = sha256_raw(data);
    std::uint64_t seed = 0;
    for (int i = 0; i < 8; ++i) {
        seed = (seed << 8) | raw[static_cast<std::size_t>(i)];
    }
    return seed;
}

}  // namespace genread
