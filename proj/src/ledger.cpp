#include "tamperled/ledger.hpp"

#include <cstring>
#include <stdexcept>

#include "tamperled/wire.hpp"

namespace tamperled::ledger {

std::array<uint8_t, kHeaderSize> canonical_serialize(const BlockHeader& h) {
  wire::Writer w;
  w.u64(h.number);
  w.digest(h.previous_hash);
  w.digest(h.data_hash);
  w.u64(h.nonce);
  w.u64(h.timestamp_ms);
  std::array<uint8_t, kHeaderSize> out;
  std::memcpy(out.data(), w.bytes().data(), kHeaderSize);
  return out;
}

Result<BlockHeader> parse_header(const uint8_t* bytes, size_t len) {
  if (len != kHeaderSize) return Error(Err::BadEncoding, "header must be 88 bytes");
  wire::Reader r(bytes, len);
  BlockHeader h;
  h.number = r.u64().value();
  h.previous_hash = r.digest().value();
  h.data_hash = r.digest().value();
  h.nonce = r.u64().value();
  h.timestamp_ms = r.u64().value();
  return h;
}

Digest compute_block_hash(const BlockHeader& header) {
  auto bytes = canonical_serialize(header);
  return sha256(bytes.data(), bytes.size());
}

const char* validity_name(Validity v) {
  switch (v) {
    case Validity::valid: return "VALID";
    case Validity::invalid_endorsement: return "INVALID_ENDORSEMENT";
    case Validity::invalid_mvcc: return "INVALID_MVCC";
    case Validity::invalid_signature: return "INVALID_SIGNATURE";
  }
  return "?";
}

Bytes serialize_transaction_list(const std::vector<TransactionEnvelope>& txs) {
  wire::Writer w;
  w.u32(static_cast<uint32_t>(txs.size()));
  for (const auto& tx : txs) w.blob(tx.serialize());
  return w.take();
}

Digest compute_data_hash(const std::vector<TransactionEnvelope>& txs) {
  return sha256(serialize_transaction_list(txs));
}

Digest compute_metadata_digest(const std::vector<Validity>& flags) {
  Bytes raw;
  raw.reserve(flags.size());
  for (Validity f : flags) raw.push_back(static_cast<uint8_t>(f));
  return sha256(raw);
}

Bytes serialize_block_record(const Block& block) {
  wire::Writer w;
  auto hdr = canonical_serialize(block.header);
  w.raw(hdr.data(), hdr.size());
  w.digest(compute_block_hash(block.header));
  w.raw(serialize_transaction_list(block.transactions));
  for (Validity f : block.validity_flags) w.u8(static_cast<uint8_t>(f));
  w.digest(compute_metadata_digest(block.validity_flags));
  return w.take();
}

namespace {

// Parsed record plus the raw byte ranges the digests cover.
struct RecordView {
  BlockHeader header;
  Digest stored_header_digest;
  size_t tx_region_off = 0;
  size_t tx_region_len = 0;
  size_t flags_off = 0;
  size_t flags_len = 0;
  Digest stored_metadata_digest;
  std::vector<TransactionEnvelope> transactions;
  std::vector<Validity> flags;
};

Result<RecordView> parse_record_view(const Bytes& record) {
  RecordView v;
  if (record.size() < kHeaderSize + Digest::kSize)
    return Error(Err::BadEncoding, "record shorter than header");
  auto hdr = parse_header(record.data(), kHeaderSize);
  if (!hdr) return hdr.error();
  v.header = hdr.value();

  wire::Reader r(record.data() + kHeaderSize, record.size() - kHeaderSize);
  auto hd = r.digest();
  if (!hd) return hd.error();
  v.stored_header_digest = hd.value();

  v.tx_region_off = record.size() - r.remaining();
  auto count = r.u32();
  if (!count) return count.error();
  if (count.value() > 1u << 20) return Error(Err::BadEncoding, "absurd tx count");
  for (uint32_t i = 0; i < count.value(); ++i) {
    auto raw = r.blob();
    if (!raw) return raw.error();
    auto env = TransactionEnvelope::deserialize(raw.value());
    if (!env) return env.error();
    v.transactions.push_back(std::move(env).value());
  }
  v.tx_region_len = record.size() - r.remaining() - v.tx_region_off;

  v.flags_off = v.tx_region_off + v.tx_region_len;
  for (uint32_t i = 0; i < count.value(); ++i) {
    auto b = r.u8();
    if (!b) return b.error();
    if (b.value() > static_cast<uint8_t>(Validity::invalid_signature))
      return Error(Err::BadEncoding, "bad validity flag");
    v.flags.push_back(static_cast<Validity>(b.value()));
  }
  v.flags_len = count.value();

  auto md = r.digest();
  if (!md) return md.error();
  v.stored_metadata_digest = md.value();
  if (auto e = r.expect_end(); !e) return e.error();
  return v;
}

// All checks that can be attributed to one block in isolation.
Result<void> check_record_integrity(const Bytes& record, const RecordView& v,
                                    uint64_t expected_number) {
  if (v.header.number != expected_number) return Error(Err::BadHeight, "wrong block number");
  Digest actual_header = sha256(record.data(), kHeaderSize);
  if (actual_header != v.stored_header_digest)
    return Error(Err::BadHeaderDigest, "header digest mismatch");
  Digest actual_data = sha256(record.data() + v.tx_region_off, v.tx_region_len);
  if (actual_data != v.header.data_hash) return Error(Err::BadDataHash, "payload digest mismatch");
  Digest actual_meta = sha256(record.data() + v.flags_off, v.flags_len);
  if (actual_meta != v.stored_metadata_digest)
    return Error(Err::BadMetadataDigest, "metadata digest mismatch");
  return {};
}

}  // namespace

Result<Block> parse_block_record(const Bytes& record) {
  auto v = parse_record_view(record);
  if (!v) return v.error();
  Block b;
  b.header = v.value().header;
  b.transactions = std::move(v.value().transactions);
  b.validity_flags = std::move(v.value().flags);
  return b;
}

std::string VerifyResult::to_string() const {
  if (ok) return "OK";
  return std::string("TAMPER block=") + std::to_string(block_number) +
         " reason=" + err_name(reason);
}

Result<std::unique_ptr<BlockStore>> BlockStore::open(const std::filesystem::path& dir) {
  auto frames = blockfile::scan_and_recover(dir);
  if (!frames) return frames.error();
  auto store = std::make_unique<BlockStore>();
  store->dir_ = dir;
  store->frames_ = std::move(frames).value();
  for (const auto& frame : store->frames_) {
    auto raw = blockfile::read_record(dir, frame);
    if (!raw) return raw.error();
    auto block = parse_block_record(raw.value());
    if (block) {
      store->blocks_.push_back(std::move(block).value());
      store->parse_ok_.push_back(true);
    } else {
      store->blocks_.push_back(Block{});
      store->parse_ok_.push_back(false);
    }
  }
  return store;
}

const Block& BlockStore::at(uint64_t number) const {
  if (number >= blocks_.size()) throw std::out_of_range("block number beyond height");
  if (!parse_ok_.empty() && !parse_ok_[number])
    throw DomainException(Error(Err::BadEncoding, "block record does not parse"));
  return blocks_[number];
}

bool BlockStore::parseable(uint64_t number) const {
  if (number >= blocks_.size()) return false;
  return parse_ok_.empty() || parse_ok_[number];
}

Digest BlockStore::tip_hash() const {
  if (blocks_.empty()) return Digest::zero();
  return compute_block_hash(blocks_.back().header);
}

Result<void> BlockStore::append(Block block) {
  if (block.header.number != height())
    return Error(Err::BadHeight, "expected number " + std::to_string(height()) + ", got " +
                                     std::to_string(block.header.number));
  Digest expected_prev = tip_hash();
  if (block.header.previous_hash != expected_prev)
    return Error(Err::BadLinkage, "previous_hash does not match tip");
  if (block.validity_flags.size() != block.transactions.size())
    return Error(Err::BadEncoding, "flags length != transactions length");
  if (compute_data_hash(block.transactions) != block.header.data_hash)
    return Error(Err::BadDataHash, "data_hash does not match payload");

  if (dir_) {
    // Durability before visibility: the record is flushed and fsynced before
    // the in-memory height moves.
    auto frame = blockfile::append_record(*dir_, serialize_block_record(block));
    if (!frame) return frame.error();
    frames_.push_back(frame.value());
  }
  blocks_.push_back(std::move(block));
  if (!parse_ok_.empty() || dir_) parse_ok_.push_back(true);
  return {};
}

Result<Bytes> BlockStore::raw_record(uint64_t number) const {
  if (number >= height()) return Error(Err::OutOfRange, "no such block");
  if (dir_) return blockfile::read_record(*dir_, frames_[number]);
  return serialize_block_record(blocks_[number]);
}

VerifyResult BlockStore::verify() const {
  std::optional<Digest> prev_header_hash;
  for (uint64_t i = 0; i < height(); ++i) {
    auto raw = raw_record(i);
    if (!raw) return VerifyResult::tampered(i, Err::Io);
    const Bytes& record = raw.value();

    auto view = parse_record_view(record);
    if (!view) return VerifyResult::tampered(i, Err::BadEncoding);

    if (auto integ = check_record_integrity(record, view.value(), i); !integ)
      return VerifyResult::tampered(i, integ.error().code);

    const Digest expected_prev = (i == 0) ? Digest::zero() : *prev_header_hash;
    if (view.value().header.previous_hash != expected_prev)
      return VerifyResult::tampered(i, Err::BadLinkage);

    prev_header_hash = sha256(record.data(), kHeaderSize);
  }
  return VerifyResult::good();
}

VerifyResult verify_chain(const BlockStore& store) { return store.verify(); }

const WorldState::Entry* WorldState::get(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void WorldState::put(const std::string& key, Bytes value, Version version) {
  entries_[key] = Entry{std::move(value), version};
}

void WorldState::erase(const std::string& key) { entries_.erase(key); }

Digest WorldState::digest() const {
  wire::Writer w;
  w.u32(static_cast<uint32_t>(entries_.size()));
  for (const auto& [key, entry] : entries_) {
    w.str(key);
    w.blob(entry.value);
    w.u64(entry.version.block);
    w.u32(entry.version.tx_index);
  }
  return sha256(w.bytes());
}

void apply_writes(WorldState& state, const Block& block) {
  for (size_t i = 0; i < block.transactions.size(); ++i) {
    if (block.validity_flags[i] != Validity::valid) continue;
    const auto& env = block.transactions[i];
    if (env.endorsements.empty()) continue;  // config transactions carry no writes
    const tx::ReadWriteSet& rwset = env.endorsements.front().rwset;
    for (const auto& wr : rwset.writes) {
      if (wr.value)
        state.put(wr.key, *wr.value, Version{block.header.number, uint32_t(i)});
      else
        state.erase(wr.key);
    }
  }
}

Result<WorldState> replay_chain(const BlockStore& store) {
  WorldState state;
  for (uint64_t i = 0; i < store.height(); ++i) {
    if (!store.parseable(i))
      return Error(Err::BadEncoding, "block " + std::to_string(i) + " does not parse");
    apply_writes(state, store.at(i));
  }
  return state;
}

}  // namespace tamperled::ledger
