// SPDX-License-Identifier: Apache-2.0

#ifndef OVSEG3R_HASH_HPP
#define OVSEG3R_HASH_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace ovseg3r {

/// FNV-1a 64-bit over a byte range. Stable across platforms; used for
/// artifact fingerprints in manifests, not for security.
inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v);

/// splitmix64 step; the mixer behind seeded label colors.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

} // namespace ovseg3r

#endif // OVSEG3R_HASH_HPP
