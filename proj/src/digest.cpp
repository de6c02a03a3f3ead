#include "tamperled/digest.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace tamperled {

std::optional<Digest> Digest::from_hex(std::string_view hex) {
  auto b = tamperled::from_hex(hex);
  if (!b || b->size() != kSize) return std::nullopt;
  Digest d;
  std::copy(b->begin(), b->end(), d.bytes.begin());
  return d;
}

Digest sha256(const uint8_t* data, size_t len) {
  Digest d;
  unsigned int out_len = 0;
  if (EVP_Digest(data, len, d.bytes.data(), &out_len, EVP_sha256(), nullptr) != 1 ||
      out_len != Digest::kSize)
    throw std::runtime_error("sha256 failed");
  return d;
}

Digest sha256(const Bytes& data) { return sha256(data.data(), data.size()); }

Sha256::Sha256() {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 init failed");
  ctx_ = ctx;
}

Sha256::~Sha256() {
  if (ctx_ != nullptr) EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

void Sha256::update(const uint8_t* data, size_t len) {
  if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, len) != 1)
    throw std::runtime_error("sha256 update failed");
}

Digest Sha256::finish() {
  Digest d;
  unsigned int out_len = 0;
  if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), d.bytes.data(), &out_len) != 1 ||
      out_len != Digest::kSize)
    throw std::runtime_error("sha256 final failed");
  return d;
}

}  // namespace tamperled
