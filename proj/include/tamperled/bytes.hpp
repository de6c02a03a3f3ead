#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tamperled {

using Bytes = std::vector<uint8_t>;

inline Bytes to_bytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}

inline std::string to_string(const Bytes& b) {
  return std::string(b.begin(), b.end());
}

std::string to_hex(const uint8_t* data, size_t len);
std::string to_hex(const Bytes& b);

// Strict: even length, [0-9a-fA-F] only.
std::optional<Bytes> from_hex(std::string_view hex);

}  // namespace tamperled
