#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace csb {

std::string sha256_hex(std::string_view bytes);
std::string base64_encode(std::string_view bytes);

// 64-bit FNV-1a; stable across platforms, used for synthetic data seeding.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace csb
