#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ctforge {

std::array<std::uint8_t, 32> sha256(const void* data, std::size_t len);
std::array<std::uint8_t, 32> sha256(const std::vector<std::uint8_t>& bytes);
std::string to_hex(const std::uint8_t* data, std::size_t len);
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);

}  // namespace ctforge
