#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace coderoute {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t state = kFnvOffsetBasis) noexcept {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

// 16 lowercase hex digits.
std::string to_hex(std::uint64_t value);

// FNV-1a over the raw bytes of a file, as hex. Throws DataError(IoError).
std::string fingerprint_file(const std::string& path);

}  // namespace coderoute
