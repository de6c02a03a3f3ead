#include "tamperled/membership.hpp"

#include <sodium.h>

#include <mutex>
#include <stdexcept>

#include "tamperled/wire.hpp"

namespace tamperled::membership {

namespace {

void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
  });
}

}  // namespace

KeyPair generate_keypair() {
  ensure_sodium();
  KeyPair kp;
  kp.public_key.resize(kPublicKeySize);
  kp.private_key.resize(kPrivateKeySize);
  crypto_sign_keypair(kp.public_key.data(), kp.private_key.data());
  return kp;
}

KeyPair generate_keypair(const std::array<uint8_t, kSeedSize>& seed) {
  ensure_sodium();
  KeyPair kp;
  kp.public_key.resize(kPublicKeySize);
  kp.private_key.resize(kPrivateKeySize);
  crypto_sign_seed_keypair(kp.public_key.data(), kp.private_key.data(), seed.data());
  return kp;
}

Result<Bytes> sign(const Bytes& private_key, const Bytes& message) {
  ensure_sodium();
  if (private_key.size() != kPrivateKeySize)
    return Error(Err::MalformedKey, "private key must be 64 bytes");
  Bytes sig(kSignatureSize);
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(),
                       private_key.data());
  return sig;
}

Result<bool> verify(const Bytes& public_key, const Bytes& message, const Bytes& signature) {
  ensure_sodium();
  if (public_key.size() != kPublicKeySize)
    return Error(Err::MalformedKey, "public key must be 32 bytes");
  if (signature.size() != kSignatureSize) return false;
  return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                     public_key.data()) == 0;
}

const char* role_name(Role r) {
  switch (r) {
    case Role::admin: return "admin";
    case Role::peer: return "peer";
    case Role::client: return "client";
    case Role::orderer: return "orderer";
    case Role::device: return "device";
  }
  return "?";
}

std::optional<Role> role_from_name(std::string_view s) {
  if (s == "admin") return Role::admin;
  if (s == "peer") return Role::peer;
  if (s == "client") return Role::client;
  if (s == "orderer") return Role::orderer;
  if (s == "device") return Role::device;
  return std::nullopt;
}

const char* ca_kind_name(CaKind k) {
  return k == CaKind::identity ? "identity" : "transport";
}

Bytes Certificate::signing_payload() const {
  wire::Writer w;
  w.str(subject);
  w.str(org);
  w.u8(static_cast<uint8_t>(role));
  w.str_map(attributes);
  w.blob(public_key);
  w.str(issuer);
  return w.take();
}

Bytes Certificate::serialize() const {
  wire::Writer w;
  w.raw(signing_payload());
  w.blob(signature);
  return w.take();
}

Result<Certificate> Certificate::deserialize(const Bytes& raw) {
  wire::Reader r(raw);
  Certificate c;
  if (auto v = r.str(); v)
    c.subject = std::move(v).value();
  else
    return v.error();
  if (auto v = r.str(); v)
    c.org = std::move(v).value();
  else
    return v.error();
  auto role_byte = r.u8();
  if (!role_byte) return role_byte.error();
  if (role_byte.value() > static_cast<uint8_t>(Role::device))
    return Error(Err::BadEncoding, "bad role byte");
  c.role = static_cast<Role>(role_byte.value());
  if (auto v = r.str_map(); v)
    c.attributes = std::move(v).value();
  else
    return v.error();
  if (auto v = r.blob(); v)
    c.public_key = std::move(v).value();
  else
    return v.error();
  if (auto v = r.str(); v)
    c.issuer = std::move(v).value();
  else
    return v.error();
  if (auto v = r.blob(); v)
    c.signature = std::move(v).value();
  else
    return v.error();
  if (auto e = r.expect_end(); !e) return e.error();
  return c;
}

Result<void> TrustedRoots::add(Root root) {
  if (root.public_key.size() != kPublicKeySize)
    return Error(Err::MalformedKey, "root key must be 32 bytes");
  for (const auto& [name, r] : roots_)
    if (r.org == root.org && r.kind == root.kind && name != root.name)
      return Error(Err::DuplicateCa,
                   "org " + root.org + " already has a " +
                       std::string(ca_kind_name(root.kind)) + " root");
  roots_[root.name] = std::move(root);
  return {};
}

const TrustedRoots::Root* TrustedRoots::find(const std::string& ca_name) const {
  auto it = roots_.find(ca_name);
  return it == roots_.end() ? nullptr : &it->second;
}

const TrustedRoots::Root* TrustedRoots::find(const std::string& org, CaKind kind) const {
  for (const auto& [_, r] : roots_)
    if (r.org == org && r.kind == kind) return &r;
  return nullptr;
}

bool validate_certificate(const Certificate& cert, const TrustedRoots& roots, CaKind kind) {
  const TrustedRoots::Root* root = roots.find(cert.issuer);
  if (root == nullptr) return false;
  if (root->org != cert.org || root->kind != kind) return false;
  auto ok = verify(root->public_key, cert.signing_payload(), cert.signature);
  return ok.ok() && ok.value();
}

CertificateAuthority::CertificateAuthority(std::string name, std::string org, CaKind kind,
                                           KeyPair keypair)
    : name_(std::move(name)), org_(std::move(org)), kind_(kind), keypair_(std::move(keypair)) {
  if (keypair_.public_key.size() != kPublicKeySize ||
      keypair_.private_key.size() != kPrivateKeySize)
    throw DomainException(Error(Err::MalformedKey, "CA keypair has wrong sizes"));
}

void CertificateAuthority::set_key_derivation_seed(const std::array<uint8_t, kSeedSize>& seed) {
  derive_seed_ = seed;
}

Result<CertificateAuthority::Issued> CertificateAuthority::issue(
    const std::string& subject, Role role, std::map<std::string, std::string> attributes) {
  KeyPair kp;
  if (derive_seed_) {
    // seed_i = SHA-256(ca_seed || issued counter || subject)
    wire::Writer w;
    w.raw(derive_seed_->data(), derive_seed_->size());
    w.u64(issued_);
    w.str(subject);
    kp = generate_keypair(sha256(w.bytes()).bytes);
  } else {
    kp = generate_keypair();
  }
  auto cert = issue_for_key(subject, role, std::move(attributes), kp.public_key);
  if (!cert) return cert.error();
  return Issued{std::move(cert).value(), std::move(kp)};
}

Result<Certificate> CertificateAuthority::issue_for_key(
    const std::string& subject, Role role, std::map<std::string, std::string> attributes,
    const Bytes& subject_public_key) {
  if (kind_ == CaKind::transport && role != Role::peer && role != Role::orderer)
    return Error(Err::RoleNotAllowed,
                 "transport CA " + name_ + " cannot issue role " + role_name(role));
  if (subject_public_key.size() != kPublicKeySize)
    return Error(Err::MalformedKey, "subject key must be 32 bytes");
  Certificate cert;
  cert.subject = subject;
  cert.org = org_;
  cert.role = role;
  cert.attributes = std::move(attributes);
  cert.public_key = subject_public_key;
  cert.issuer = name_;
  auto sig = sign(keypair_.private_key, cert.signing_payload());
  if (!sig) return sig.error();
  cert.signature = std::move(sig).value();
  ++issued_;
  return cert;
}

Result<CertificateAuthority*> CaRegistry::create(const std::string& name,
                                                 const std::string& org, CaKind kind,
                                                 KeyPair keypair) {
  if (by_name_.count(name) > 0)
    return Error(Err::DuplicateCa, "CA name already exists: " + name);
  for (const auto& [_, ca] : by_name_)
    if (ca->org() == org && ca->kind() == kind)
      return Error(Err::DuplicateCa, "org " + org + " already has a " +
                                         std::string(ca_kind_name(kind)) + " CA");
  auto ca = std::make_unique<CertificateAuthority>(name, org, kind, std::move(keypair));
  CertificateAuthority* ptr = ca.get();
  by_name_.emplace(name, std::move(ca));
  return ptr;
}

CertificateAuthority* CaRegistry::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second.get();
}

CertificateAuthority* CaRegistry::find(const std::string& org, CaKind kind) {
  for (auto& [_, ca] : by_name_)
    if (ca->org() == org && ca->kind() == kind) return ca.get();
  return nullptr;
}

TrustedRoots CaRegistry::roots() const {
  TrustedRoots r;
  for (const auto& [_, ca] : by_name_) (void)r.add(ca->root());
  return r;
}

}  // namespace tamperled::membership
