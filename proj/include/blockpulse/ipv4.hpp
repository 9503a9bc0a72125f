// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace blockpulse {

/// An IPv4 /24 prefix, stored as its upper 24 bits.
struct Block24 {
  std::uint32_t prefix = 0;

  constexpr Block24() = default;
  constexpr explicit Block24(std::uint32_t p) : prefix(p & 0xFFFFFFu) {}

  constexpr std::uint32_t address(std::uint8_t offset) const { return (prefix << 8) | offset; }

  friend constexpr auto operator<=>(Block24, Block24) = default;
};

/// Geographic position in degrees.
struct LatLon {
  double lat = 0, lon = 0;
};

/// Parses "a.b.c.0/24". The host octet must be zero.
inline std::optional<Block24> parse_block(std::string_view text) {
  std::uint32_t octets[4]{};
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int i = 0; i < 4; ++i) {
    unsigned v = 0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc{} || next == p || v > 255) return std::nullopt;
    octets[i] = v;
    p = next;
    if (i < 3) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
  }
  if (std::string_view(p, end - p) != "/24" || octets[3] != 0) return std::nullopt;
  return Block24{(octets[0] << 16) | (octets[1] << 8) | octets[2]};
}

inline std::string to_string(Block24 b) {
  return std::to_string((b.prefix >> 16) & 0xFF) + '.' + std::to_string((b.prefix >> 8) & 0xFF) + '.' +
         std::to_string(b.prefix & 0xFF) + ".0/24";
}

}  // namespace blockpulse
