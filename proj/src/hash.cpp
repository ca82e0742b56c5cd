#include "ctforge/hash.hpp"

#include <sodium.h>

#include <mutex>

#include "ctforge/error.hpp"

namespace ctforge {

namespace {

void ensure_sodium() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) {
            throw Error("libsodium initialization failed");
        }
    });
}

}  // namespace

std::array<std::uint8_t, 32> sha256(const void* data, std::size_t len) {
    ensure_sodium();
    std::array<std::uint8_t, 32> out{};
    crypto_hash_sha256(out.data(), static_cast<const unsigned char*>(data), len);
    return out;
}

std::array<std::uint8_t, 32> sha256(const std::vector<std::uint8_t>& bytes) {
    return sha256(bytes.data(), bytes.size());
}

std::string to_hex(const std::uint8_t* data, std::size_t len) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (std::size_t i = 0; i < len; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0xf]);
    }
    return out;
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
    const auto digest = sha256(bytes);
    return to_hex(digest.data(), digest.size());
}

}  // namespace ctforge
