#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tamperled/blockfile.hpp"
#include "tamperled/bytes.hpp"
#include "tamperled/digest.hpp"
#include "tamperled/error.hpp"
#include "tamperled/tx.hpp"

namespace tamperled::ledger {

using tx::TransactionEnvelope;
using tx::Version;

// Canonical header layout: fields in declaration order, integers as 8-byte
// big-endian, digests raw. 8 + 32 + 32 + 8 + 8 = 88 bytes.
inline constexpr size_t kHeaderSize = 88;

struct BlockHeader {
  uint64_t number = 0;
  Digest previous_hash;  // all-zero for genesis
  Digest data_hash;      // digest of the serialized transaction list
  uint64_t nonce = 0;    // sealing value chosen by the orderer; no PoW target
  uint64_t timestamp_ms = 0;  // logical time

  auto operator<=>(const BlockHeader&) const = default;
};

std::array<uint8_t, kHeaderSize> canonical_serialize(const BlockHeader& header);
Result<BlockHeader> parse_header(const uint8_t* bytes, size_t len);

// SHA-256 of the canonical 88-byte header layout. Pure.
Digest compute_block_hash(const BlockHeader& header);

enum class Validity : uint8_t {
  valid = 0,
  invalid_endorsement = 1,
  invalid_mvcc = 2,
  invalid_signature = 3,
};

const char* validity_name(Validity v);

struct Block {
  BlockHeader header;
  std::vector<TransactionEnvelope> transactions;
  std::vector<Validity> validity_flags;  // assigned exactly once, at commit
};

// Serialized transaction list (the bytes data_hash covers): 4-byte count,
// then one length-prefixed envelope each.
Bytes serialize_transaction_list(const std::vector<TransactionEnvelope>& txs);
Digest compute_data_hash(const std::vector<TransactionEnvelope>& txs);

// Digest over the validity flags; persisted alongside so flags are covered
// without being part of the header's data_hash.
Digest compute_metadata_digest(const std::vector<Validity>& flags);

// Persisted record layout:
//   [88-byte header][32-byte header digest][transaction list][flags][32-byte
//   metadata digest]
// The stored header digest pins header-internal bytes (nonce, timestamp) to
// this block so verification attributes any mutation to the exact block.
Bytes serialize_block_record(const Block& block);
Result<Block> parse_block_record(const Bytes& record);

struct VerifyResult {
  bool ok = true;
  uint64_t block_number = 0;  // first violating block when !ok
  Err reason = Err::BadEncoding;

  static VerifyResult good() { return {}; }
  static VerifyResult tampered(uint64_t block, Err reason) {
    return {false, block, reason};
  }
  std::string to_string() const;
};

// Append-only block store. Heights are contiguous from 0 and every append is
// linkage- and digest-checked. When opened on a directory the store is backed
// by the append-only block file + offset index; verification always reads the
// persisted bytes so post-commit mutations on disk are detected.
class BlockStore {
 public:
  // In-memory store.
  BlockStore() = default;

  // File-backed store; recovers from a partial tail write, loads existing
  // blocks. Records that no longer parse are kept as raw evidence; accessing
  // them via at() throws, verify() reports them.
  static Result<std::unique_ptr<BlockStore>> open(const std::filesystem::path& dir);

  uint64_t height() const { return blocks_.size(); }
  const Block& at(uint64_t number) const;
  bool parseable(uint64_t number) const;
  // Hash of the tip header; zero digest when empty.
  Digest tip_hash() const;

  Result<void> append(Block block);

  // Canonical record bytes; re-read from disk for file-backed stores.
  Result<Bytes> raw_record(uint64_t number) const;

  VerifyResult verify() const;

  bool file_backed() const { return dir_.has_value(); }
  const std::filesystem::path& directory() const { return *dir_; }

 private:
  std::vector<Block> blocks_;
  std::vector<bool> parse_ok_;
  std::optional<std::filesystem::path> dir_;
  std::vector<blockfile::Frame> frames_;
};

// Recomputes every header digest, payload hash, flag digest and linkage from
// genesis; returns the first violation with its block number.
VerifyResult verify_chain(const BlockStore& store);

// Latest key/value view over all VALID committed write-sets.
class WorldState {
 public:
  struct Entry {
    Bytes value;
    Version version;
  };

  const Entry* get(const std::string& key) const;
  size_t size() const { return entries_.size(); }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  void put(const std::string& key, Bytes value, Version version);
  void erase(const std::string& key);

  // Digest over sorted (key, value, version) triples.
  Digest digest() const;

 private:
  std::map<std::string, Entry> entries_;
};

// Applies the write-sets of VALID transactions in order; INVALID transactions
// leave the state untouched. The block must already carry its flags.
void apply_writes(WorldState& state, const Block& block);

// Rebuild from genesis; fails if any block does not parse cleanly.
Result<WorldState> replay_chain(const BlockStore& store);

}  // namespace tamperled::ledger
