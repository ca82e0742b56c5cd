#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctforge/volume.hpp"

namespace ctforge {

// Simple raw volume container: a human-readable text header
//   dims=nx,ny,nz
//   spacing=sx,sy,sz
//   type=int16le
//   series=<id>
// followed by a blank line and little-endian int16 voxels in x-fastest order.

std::vector<std::uint8_t> write_raw(const Volume& volume);
Volume read_raw(const std::vector<std::uint8_t>& bytes);

void write_raw_file(const Volume& volume, const std::string& path);
Volume read_raw_file(const std::string& path);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

}  // namespace ctforge
