#include "coderoute/hash.hpp"

#include <array>
#include <fstream>

#include "coderoute/error.hpp"

namespace coderoute {

std::string to_hex(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

std::string fingerprint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(ErrorCode::IoError, "cannot open " + path);
  std::uint64_t state = kFnvOffsetBasis;
  std::array<char, 1 << 14> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    state = fnv1a64(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), state);
  }
  return to_hex(state);
}

}  // namespace coderoute
