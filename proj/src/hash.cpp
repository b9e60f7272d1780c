// SPDX-License-Identifier: Apache-2.0

#include "ovseg3r/hash.hpp"

namespace ovseg3r {

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

} // namespace ovseg3r
