#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tamperled/error.hpp"
#include "tamperled/membership.hpp"

namespace tamperled::policy {

// A validated network identity, as seen by policy evaluation and chaincode.
// Derived from a certificate that already passed validate_certificate.
struct Identity {
  std::string org;
  membership::Role role = membership::Role::client;
  std::string subject;
  std::map<std::string, std::string> attributes;

  static Identity from_certificate(const membership::Certificate& cert) {
    return {cert.org, cert.role, cert.subject, cert.attributes};
  }
};

// Principal matching is on organization + role only, never on subject names.
// Role kAnyRole matches every role. Org comparison is ASCII case-insensitive
// so config-file principals like "iot.peer" match the org "IoT".
struct Principal {
  static constexpr uint8_t kAnyRole = 0xFF;

  std::string org;
  uint8_t role = kAnyRole;  // kAnyRole or a membership::Role value

  bool matches(const Identity& id) const;
  std::string to_string() const;
};

Result<Principal> parse_principal(std::string_view text);

// Boolean expression tree over principals: Leaf | And | Or | OutOf(n).
struct EndorsementPolicy {
  enum class Kind : uint8_t { leaf, all_of, any_of, out_of };

  Kind kind = Kind::leaf;
  Principal principal;  // leaf only
  uint32_t threshold = 0;  // out_of only; 1 <= threshold <= children.size()
  std::vector<EndorsementPolicy> children;

  std::string to_string() const;

  static EndorsementPolicy leaf(Principal p);
  static EndorsementPolicy all_of(std::vector<EndorsementPolicy> cs);
  static EndorsementPolicy any_of(std::vector<EndorsementPolicy> cs);
  static EndorsementPolicy out_of(uint32_t n, std::vector<EndorsementPolicy> cs);
};

// Parses the prefix notation used in channel configuration, e.g.
//   outof(2, org1.peer, org2.peer, iot.peer)
//   and(org1.peer, or(org2.peer, iot.device))
//   iot.admin
Result<EndorsementPolicy> parse_policy(std::string_view text);

// Endorsers from the same (org, role) count once, so a single organization
// cannot satisfy an out_of threshold by endorsing repeatedly.
bool evaluate_endorsement(const EndorsementPolicy& policy,
                          const std::vector<Identity>& endorsers);

enum class Action : uint8_t { read, write, admin };

// Channel-level reader/writer/admin lists. Admins must be non-empty and
// admin access implies write access.
struct ChannelPolicySet {
  std::vector<Principal> readers;
  std::vector<Principal> writers;
  std::vector<Principal> admins;

  Result<void> validate() const;
};

bool check_channel_access(const ChannelPolicySet& policies, const Identity& identity,
                          Action action);

}  // namespace tamperled::policy
