// SPDX-License-Identifier: Apache-2.0

#ifndef OVSEG3R_PLY_HPP
#define OVSEG3R_PLY_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "ovseg3r/types.hpp"

namespace ovseg3r::io {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
};

/// Reads ASCII or binary-little-endian PLY. The vertex element must
/// carry float x,y,z; other properties and elements are skipped.
PointCloud decode_ply(std::span<const std::uint8_t> bytes);

/// Canonical encoding: binary little endian, vertex with float x,y,z only.
std::vector<std::uint8_t> encode_ply(const PointCloud& cloud);

/// Same layout plus uchar red/green/blue per vertex.
std::vector<std::uint8_t> encode_ply_colored(const PointCloud& cloud,
                                             std::span<const Rgb> colors);

} // namespace ovseg3r::io

#endif // OVSEG3R_PLY_HPP
