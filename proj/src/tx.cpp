#include "tamperled/tx.hpp"

namespace tamperled::tx {

namespace {

// Certificates are nested as length-prefixed canonical blobs so that envelope
// parsing stays strictly bounds-checked.
void write_cert(wire::Writer& w, const membership::Certificate& cert) {
  w.blob(cert.serialize());
}

Result<membership::Certificate> read_cert(wire::Reader& r) {
  auto raw = r.blob();
  if (!raw) return raw.error();
  return membership::Certificate::deserialize(raw.value());
}

}  // namespace

Bytes Proposal::signing_payload() const {
  wire::Writer w;
  w.str(channel);
  w.str(chaincode);
  w.str(function);
  w.u32(static_cast<uint32_t>(args.size()));
  for (const auto& a : args) w.blob(a);
  write_cert(w, creator);
  w.raw(tx_nonce.data(), tx_nonce.size());
  w.u64(submitted_at_ms);
  return w.take();
}

Bytes Proposal::serialize() const {
  wire::Writer w;
  w.raw(signing_payload());
  w.blob(signature);
  return w.take();
}

Result<Proposal> Proposal::deserialize(wire::Reader& r) {
  Proposal p;
  if (auto v = r.str(); v) p.channel = std::move(v).value(); else return v.error();
  if (auto v = r.str(); v) p.chaincode = std::move(v).value(); else return v.error();
  if (auto v = r.str(); v) p.function = std::move(v).value(); else return v.error();
  auto argc = r.u32();
  if (!argc) return argc.error();
  if (argc.value() > 1u << 20) return Error(Err::BadEncoding, "absurd arg count");
  for (uint32_t i = 0; i < argc.value(); ++i) {
    auto a = r.blob();
    if (!a) return a.error();
    p.args.push_back(std::move(a).value());
  }
  if (auto c = read_cert(r); c) p.creator = std::move(c).value(); else return c.error();
  if (r.remaining() < kTxNonceSize) return Error(Err::BadEncoding, "short nonce");
  for (size_t i = 0; i < kTxNonceSize; ++i) {
    auto b = r.u8();
    if (!b) return b.error();
    p.tx_nonce[i] = b.value();
  }
  if (auto v = r.u64(); v) p.submitted_at_ms = v.value(); else return v.error();
  if (auto v = r.blob(); v) p.signature = std::move(v).value(); else return v.error();
  return p;
}

Digest Proposal::digest() const {
  Bytes payload = signing_payload();
  return sha256(payload);
}

Bytes ReadWriteSet::serialize() const {
  wire::Writer w;
  w.u32(static_cast<uint32_t>(reads.size()));
  for (const auto& rd : reads) {
    w.str(rd.key);
    w.flag(rd.version.has_value());
    if (rd.version) {
      w.u64(rd.version->block);
      w.u32(rd.version->tx_index);
    }
  }
  w.u32(static_cast<uint32_t>(writes.size()));
  for (const auto& wr : writes) {
    w.str(wr.key);
    w.flag(wr.value.has_value());
    if (wr.value) w.blob(*wr.value);
  }
  return w.take();
}

Result<ReadWriteSet> ReadWriteSet::deserialize(wire::Reader& r) {
  ReadWriteSet rw;
  auto nr = r.u32();
  if (!nr) return nr.error();
  for (uint32_t i = 0; i < nr.value(); ++i) {
    ReadEntry e;
    if (auto v = r.str(); v) e.key = std::move(v).value(); else return v.error();
    auto has = r.flag();
    if (!has) return has.error();
    if (has.value()) {
      Version ver;
      if (auto v = r.u64(); v) ver.block = v.value(); else return v.error();
      if (auto v = r.u32(); v) ver.tx_index = v.value(); else return v.error();
      e.version = ver;
    }
    rw.reads.push_back(std::move(e));
  }
  auto nw = r.u32();
  if (!nw) return nw.error();
  for (uint32_t i = 0; i < nw.value(); ++i) {
    WriteEntry e;
    if (auto v = r.str(); v) e.key = std::move(v).value(); else return v.error();
    auto has = r.flag();
    if (!has) return has.error();
    if (has.value()) {
      if (auto v = r.blob(); v) e.value = std::move(v).value(); else return v.error();
    }
    rw.writes.push_back(std::move(e));
  }
  return rw;
}

Bytes Endorsement::signing_payload(const Digest& proposal_digest, const ReadWriteSet& rwset,
                                   const Bytes& response) {
  wire::Writer w;
  w.digest(proposal_digest);
  w.blob(rwset.serialize());
  w.blob(response);
  return w.take();
}

Bytes Endorsement::serialize() const {
  wire::Writer w;
  write_cert(w, endorser);
  w.blob(rwset.serialize());
  w.blob(response);
  w.blob(signature);
  return w.take();
}

Result<Endorsement> Endorsement::deserialize(wire::Reader& r) {
  Endorsement e;
  if (auto c = read_cert(r); c) e.endorser = std::move(c).value(); else return c.error();
  auto rw_raw = r.blob();
  if (!rw_raw) return rw_raw.error();
  {
    wire::Reader rr(rw_raw.value());
    auto rw = ReadWriteSet::deserialize(rr);
    if (!rw) return rw.error();
    if (auto end = rr.expect_end(); !end) return end.error();
    e.rwset = std::move(rw).value();
  }
  if (auto v = r.blob(); v) e.response = std::move(v).value(); else return v.error();
  if (auto v = r.blob(); v) e.signature = std::move(v).value(); else return v.error();
  return e;
}

Bytes TransactionEnvelope::serialize() const {
  wire::Writer w;
  w.blob(proposal.serialize());
  w.u32(static_cast<uint32_t>(endorsements.size()));
  for (const auto& e : endorsements) w.blob(e.serialize());
  return w.take();
}

Result<TransactionEnvelope> TransactionEnvelope::deserialize(wire::Reader& r) {
  TransactionEnvelope env;
  auto praw = r.blob();
  if (!praw) return praw.error();
  {
    wire::Reader pr(praw.value());
    auto p = Proposal::deserialize(pr);
    if (!p) return p.error();
    if (auto end = pr.expect_end(); !end) return end.error();
    env.proposal = std::move(p).value();
  }
  auto n = r.u32();
  if (!n) return n.error();
  if (n.value() > 1u << 16) return Error(Err::BadEncoding, "absurd endorsement count");
  for (uint32_t i = 0; i < n.value(); ++i) {
    auto eraw = r.blob();
    if (!eraw) return eraw.error();
    wire::Reader er(eraw.value());
    auto e = Endorsement::deserialize(er);
    if (!e) return e.error();
    if (auto end = er.expect_end(); !end) return end.error();
    env.endorsements.push_back(std::move(e).value());
  }
  return env;
}

Result<TransactionEnvelope> TransactionEnvelope::deserialize(const Bytes& raw) {
  wire::Reader r(raw);
  auto env = deserialize(r);
  if (!env) return env;
  if (auto end = r.expect_end(); !end) return end.error();
  return env;
}

}  // namespace tamperled::tx
