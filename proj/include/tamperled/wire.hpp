#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <string>
#include <string_view>

#include "tamperled/bytes.hpp"
#include "tamperled/digest.hpp"
#include "tamperled/error.hpp"

namespace tamperled::wire {

// Canonical binary encoding used for everything that gets hashed, signed or
// persisted: fixed-width big-endian integers, length-prefixed byte strings,
// maps as sorted key/value lists. The encoding is bijective: every accepted
// byte string is the unique encoding of its value, so re-serializing a parsed
// value reproduces the input exactly. Parsers reject anything else.

class Writer {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u32(uint32_t v) {
    for (int i = 3; i >= 0; --i) buf_.push_back(uint8_t(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 7; i >= 0; --i) buf_.push_back(uint8_t(v >> (8 * i)));
  }
  void raw(const uint8_t* p, size_t n) { buf_.insert(buf_.end(), p, p + n); }
  void raw(const Bytes& b) { raw(b.data(), b.size()); }
  void digest(const Digest& d) { raw(d.bytes.data(), d.bytes.size()); }
  void blob(const Bytes& b) {
    u32(static_cast<uint32_t>(b.size()));
    raw(b);
  }
  void str(std::string_view s) {
    u32(static_cast<uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void str_map(const std::map<std::string, std::string>& m) {
    u32(static_cast<uint32_t>(m.size()));
    for (const auto& [k, v] : m) {
      str(k);
      str(v);
    }
  }
  void flag(bool b) { u8(b ? 1 : 0); }

  const Bytes& bytes() const { return buf_; }
  Bytes take() { return std::move(buf_); }
  size_t size() const { return buf_.size(); }

 private:
  Bytes buf_;
};

// Bounds-checked reader. All accessors return Result so that tampered or
// truncated input surfaces as BadEncoding instead of UB.
class Reader {
 public:
  Reader(const uint8_t* p, size_t n) : p_(p), end_(p + n) {}
  explicit Reader(const Bytes& b) : Reader(b.data(), b.size()) {}

  Result<uint8_t> u8() {
    if (remaining() < 1) return short_input();
    return *p_++;
  }
  Result<uint32_t> u32() {
    if (remaining() < 4) return short_input();
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | *p_++;
    return v;
  }
  Result<uint64_t> u64() {
    if (remaining() < 8) return short_input();
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | *p_++;
    return v;
  }
  Result<Digest> digest() {
    if (remaining() < Digest::kSize) return short_input();
    Digest d;
    std::memcpy(d.bytes.data(), p_, Digest::kSize);
    p_ += Digest::kSize;
    return d;
  }
  Result<Bytes> blob() {
    auto n = u32();
    if (!n) return n.error();
    if (remaining() < n.value()) return short_input();
    Bytes b(p_, p_ + n.value());
    p_ += n.value();
    return b;
  }
  Result<std::string> str() {
    auto b = blob();
    if (!b) return b.error();
    return std::string(b.value().begin(), b.value().end());
  }
  // Keys must be strictly ascending; rejects duplicates and non-canonical order.
  Result<std::map<std::string, std::string>> str_map() {
    auto n = u32();
    if (!n) return n.error();
    std::map<std::string, std::string> m;
    std::string prev;
    for (uint32_t i = 0; i < n.value(); ++i) {
      auto k = str();
      if (!k) return k.error();
      auto v = str();
      if (!v) return v.error();
      if (i > 0 && k.value() <= prev)
        return Error(Err::BadEncoding, "map keys not strictly ascending");
      prev = k.value();
      m.emplace(std::move(k).value(), std::move(v).value());
    }
    return m;
  }
  Result<bool> flag() {
    auto v = u8();
    if (!v) return v.error();
    if (v.value() > 1) return Error(Err::BadEncoding, "bad flag byte");
    return v.value() == 1;
  }

  size_t remaining() const { return static_cast<size_t>(end_ - p_); }
  bool at_end() const { return p_ == end_; }
  Result<void> expect_end() const {
    if (!at_end()) return Error(Err::BadEncoding, "trailing bytes");
    return {};
  }

 private:
  static Error short_input() { return Error(Err::BadEncoding, "short input"); }
  const uint8_t* p_;
  const uint8_t* end_;
};

}  // namespace tamperled::wire
