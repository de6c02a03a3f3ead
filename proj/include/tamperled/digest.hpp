#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>

#include "tamperled/bytes.hpp"

namespace tamperled {

// 32-byte SHA-256 value. Rendered everywhere as 64 lowercase hex chars.
struct Digest {
  std::array<uint8_t, 32> bytes{};

  static constexpr size_t kSize = 32;

  static Digest zero() { return Digest{}; }
  bool is_zero() const {
    for (uint8_t b : bytes)
      if (b != 0) return false;
    return true;
  }

  std::string hex() const { return to_hex(bytes.data(), bytes.size()); }
  static std::optional<Digest> from_hex(std::string_view hex);

  auto operator<=>(const Digest&) const = default;
};

Digest sha256(const uint8_t* data, size_t len);
Digest sha256(const Bytes& data);

// Incremental hasher for multi-part inputs.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const uint8_t* data, size_t len);
  void update(const Bytes& data) { update(data.data(), data.size()); }
  Digest finish();

 private:
  void* ctx_;
};

}  // namespace tamperled
