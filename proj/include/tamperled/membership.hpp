#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "tamperled/bytes.hpp"
#include "tamperled/digest.hpp"
#include "tamperled/error.hpp"

namespace tamperled::membership {

// Ed25519 throughout: 32-byte verification keys, 64-byte signing keys,
// 64-byte detached signatures.
inline constexpr size_t kPublicKeySize = 32;
inline constexpr size_t kPrivateKeySize = 64;
inline constexpr size_t kSignatureSize = 64;
inline constexpr size_t kSeedSize = 32;

struct KeyPair {
  Bytes public_key;
  Bytes private_key;
};

// Fresh random keypair, or a deterministic one derived from a 32-byte seed.
KeyPair generate_keypair();
KeyPair generate_keypair(const std::array<uint8_t, kSeedSize>& seed);

Result<Bytes> sign(const Bytes& private_key, const Bytes& message);
Result<bool> verify(const Bytes& public_key, const Bytes& message, const Bytes& signature);

enum class Role : uint8_t {
  admin = 0,
  peer = 1,
  client = 2,
  orderer = 3,
  device = 4,
};

const char* role_name(Role r);
std::optional<Role> role_from_name(std::string_view s);

enum class CaKind : uint8_t {
  identity = 0,
  transport = 1,
};

const char* ca_kind_name(CaKind k);

// Signed membership credential. The signature covers the canonical
// serialization of every field before it; org and role are fixed at issue.
struct Certificate {
  std::string subject;
  std::string org;
  Role role = Role::client;
  std::map<std::string, std::string> attributes;
  Bytes public_key;
  std::string issuer;  // CA name
  Bytes signature;

  // Fields covered by the issuer signature, canonically serialized.
  Bytes signing_payload() const;
  // Full canonical form: payload plus signature. This is the on-disk format.
  Bytes serialize() const;
  static Result<Certificate> deserialize(const Bytes& raw);

  std::string attribute(const std::string& key) const {
    auto it = attributes.find(key);
    return it == attributes.end() ? std::string() : it->second;
  }
};

// Root registry used to validate certificates and transport handshakes.
// One identity CA and one transport CA per organization.
class TrustedRoots {
 public:
  struct Root {
    std::string name;
    std::string org;
    CaKind kind;
    Bytes public_key;
  };

  Result<void> add(Root root);
  const Root* find(const std::string& ca_name) const;
  const Root* find(const std::string& org, CaKind kind) const;
  bool empty() const { return roots_.empty(); }
  const std::map<std::string, Root>& all() const { return roots_; }

 private:
  std::map<std::string, Root> roots_;  // by CA name
};

// True iff the certificate's signature verifies under the root registered for
// (cert.org, kind). Pure; unknown issuers and malformed input yield false.
bool validate_certificate(const Certificate& cert, const TrustedRoots& roots,
                          CaKind kind = CaKind::identity);

// Per-organization issuing authority. Issuance is serialized per CA; the
// certificates it produces are immutable values.
class CertificateAuthority {
 public:
  CertificateAuthority(std::string name, std::string org, CaKind kind, KeyPair keypair);

  struct Issued {
    Certificate certificate;
    KeyPair keypair;  // subject keys, generated here for simulation convenience
  };

  // Transport CAs only issue peer/orderer credentials.
  Result<Issued> issue(const std::string& subject, Role role,
                       std::map<std::string, std::string> attributes = {});
  // Same, but the subject brings its own keypair.
  Result<Certificate> issue_for_key(const std::string& subject, Role role,
                                    std::map<std::string, std::string> attributes,
                                    const Bytes& subject_public_key);

  const std::string& name() const { return name_; }
  const std::string& org() const { return org_; }
  CaKind kind() const { return kind_; }
  const Bytes& public_key() const { return keypair_.public_key; }
  uint64_t issued_count() const { return issued_; }
  TrustedRoots::Root root() const { return {name_, org_, kind_, keypair_.public_key}; }

  // Deterministic subject-key derivation so that runs with a fixed master
  // seed reproduce the same identities. Counter advances per issuance.
  void set_key_derivation_seed(const std::array<uint8_t, kSeedSize>& seed);

 private:
  std::string name_;
  std::string org_;
  CaKind kind_;
  KeyPair keypair_;
  uint64_t issued_ = 0;
  std::optional<std::array<uint8_t, kSeedSize>> derive_seed_;
};

// Registry enforcing the one-CA-per-(org, kind) invariant.
class CaRegistry {
 public:
  Result<CertificateAuthority*> create(const std::string& name, const std::string& org,
                                       CaKind kind, KeyPair keypair);
  CertificateAuthority* find(const std::string& name);
  CertificateAuthority* find(const std::string& org, CaKind kind);
  TrustedRoots roots() const;

 private:
  std::map<std::string, std::unique_ptr<CertificateAuthority>> by_name_;
};

}  // namespace tamperled::membership
