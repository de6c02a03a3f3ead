#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tamperled/bytes.hpp"
#include "tamperled/digest.hpp"
#include "tamperled/error.hpp"
#include "tamperled/membership.hpp"
#include "tamperled/wire.hpp"

namespace tamperled::tx {

// World-state version: the committed coordinates of the transaction that last
// wrote a key.
struct Version {
  uint64_t block = 0;
  uint32_t tx_index = 0;

  auto operator<=>(const Version&) const = default;
};

inline constexpr size_t kTxNonceSize = 24;
using TxNonce = std::array<uint8_t, kTxNonceSize>;

// Client call signed by its creator. tx_nonce makes (creator, nonce) unique
// per channel; submitted_at_ms is the logical submission time and feeds
// deterministic timestamps inside chaincode.
struct Proposal {
  std::string channel;
  std::string chaincode;
  std::string function;
  std::vector<Bytes> args;
  membership::Certificate creator;
  TxNonce tx_nonce{};
  uint64_t submitted_at_ms = 0;
  Bytes signature;  // creator's signature over signing_payload()

  Bytes signing_payload() const;
  Bytes serialize() const;
  static Result<Proposal> deserialize(wire::Reader& r);

  // Transaction id: digest of the unsigned payload.
  Digest digest() const;
};

struct ReadEntry {
  std::string key;
  std::optional<Version> version;  // absent = key did not exist at endorsement

  auto operator<=>(const ReadEntry&) const = default;
};

struct WriteEntry {
  std::string key;
  std::optional<Bytes> value;  // absent = delete

  auto operator<=>(const WriteEntry&) const = default;
};

// Speculative effects captured at endorsement. Keys are distinct within each
// list; byte-identical rwsets across endorsers are required at assembly.
struct ReadWriteSet {
  std::vector<ReadEntry> reads;
  std::vector<WriteEntry> writes;

  Bytes serialize() const;
  static Result<ReadWriteSet> deserialize(wire::Reader& r);

  auto operator<=>(const ReadWriteSet&) const = default;
};

struct Endorsement {
  membership::Certificate endorser;
  ReadWriteSet rwset;
  Bytes response;
  Bytes signature;  // over (proposal digest, rwset bytes, response)

  static Bytes signing_payload(const Digest& proposal_digest, const ReadWriteSet& rwset,
                               const Bytes& response);
  Bytes serialize() const;
  static Result<Endorsement> deserialize(wire::Reader& r);
};

struct TransactionEnvelope {
  Proposal proposal;
  std::vector<Endorsement> endorsements;

  Bytes serialize() const;
  static Result<TransactionEnvelope> deserialize(const Bytes& raw);
  static Result<TransactionEnvelope> deserialize(wire::Reader& r);
};

}  // namespace tamperled::tx
