#include "tamperled/network.hpp"

#include <algorithm>
#include <cstdio>

#include "tamperled/wire.hpp"

namespace tamperled::net {

using membership::CaKind;
using membership::Role;

namespace {

void write_principal(wire::Writer& w, const policy::Principal& p) {
  w.str(p.org);
  w.u8(p.role);
}

Result<policy::Principal> read_principal(wire::Reader& r) {
  policy::Principal p;
  if (auto v = r.str(); v) p.org = std::move(v).value(); else return v.error();
  auto role = r.u8();
  if (!role) return role.error();
  if (role.value() != policy::Principal::kAnyRole &&
      role.value() > static_cast<uint8_t>(Role::device))
    return Error(Err::BadEncoding, "bad principal role");
  p.role = role.value();
  return p;
}

void write_principals(wire::Writer& w, const std::vector<policy::Principal>& ps) {
  w.u32(static_cast<uint32_t>(ps.size()));
  for (const auto& p : ps) write_principal(w, p);
}

Result<std::vector<policy::Principal>> read_principals(wire::Reader& r) {
  auto n = r.u32();
  if (!n) return n.error();
  std::vector<policy::Principal> ps;
  for (uint32_t i = 0; i < n.value(); ++i) {
    auto p = read_principal(r);
    if (!p) return p.error();
    ps.push_back(std::move(p).value());
  }
  return ps;
}

void write_policy_tree(wire::Writer& w, const policy::EndorsementPolicy& p) {
  w.u8(static_cast<uint8_t>(p.kind));
  if (p.kind == policy::EndorsementPolicy::Kind::leaf) {
    write_principal(w, p.principal);
    return;
  }
  w.u32(p.threshold);
  w.u32(static_cast<uint32_t>(p.children.size()));
  for (const auto& c : p.children) write_policy_tree(w, c);
}

Result<policy::EndorsementPolicy> read_policy_tree(wire::Reader& r, int depth = 0) {
  if (depth > 32) return Error(Err::BadEncoding, "policy tree too deep");
  auto kind = r.u8();
  if (!kind) return kind.error();
  if (kind.value() > static_cast<uint8_t>(policy::EndorsementPolicy::Kind::out_of))
    return Error(Err::BadEncoding, "bad policy node kind");
  policy::EndorsementPolicy p;
  p.kind = static_cast<policy::EndorsementPolicy::Kind>(kind.value());
  if (p.kind == policy::EndorsementPolicy::Kind::leaf) {
    auto pr = read_principal(r);
    if (!pr) return pr.error();
    p.principal = std::move(pr).value();
    return p;
  }
  auto threshold = r.u32();
  if (!threshold) return threshold.error();
  p.threshold = threshold.value();
  auto n = r.u32();
  if (!n) return n.error();
  if (n.value() == 0 || n.value() > 64)
    return Error(Err::BadEncoding, "bad policy child count");
  for (uint32_t i = 0; i < n.value(); ++i) {
    auto c = read_policy_tree(r, depth + 1);
    if (!c) return c.error();
    p.children.push_back(std::move(c).value());
  }
  if (p.kind == policy::EndorsementPolicy::Kind::out_of &&
      (p.threshold < 1 || p.threshold > p.children.size()))
    return Error(Err::BadEncoding, "outof threshold out of range");
  return p;
}

}  // namespace

bool ChannelConfig::is_member(const std::string& org) const {
  return std::any_of(members.begin(), members.end(),
                     [&](const Member& m) { return m.org == org; });
}

Result<void> ChannelConfig::validate() const {
  if (name.empty()) return Error(Err::InvalidConfig, "channel name empty");
  if (members.empty()) return Error(Err::InvalidConfig, "channel needs members");
  if (batch_max_count < 1) return Error(Err::InvalidConfig, "batch_max_count must be >= 1");
  if (auto v = policy_set.validate(); !v)
    return Error(Err::InvalidConfig, v.error().detail);
  if (trusted_roots.empty()) return Error(Err::InvalidConfig, "channel needs trusted roots");
  return {};
}

Bytes ChannelConfig::serialize() const {
  wire::Writer w;
  w.str(name);
  w.u32(static_cast<uint32_t>(members.size()));
  for (const auto& m : members) {
    w.str(m.org);
    w.str(m.anchor_peer);
  }
  write_principals(w, policy_set.readers);
  write_principals(w, policy_set.writers);
  write_principals(w, policy_set.admins);
  w.u32(static_cast<uint32_t>(chaincode_policies.size()));
  for (const auto& [cc, tree] : chaincode_policies) {
    w.str(cc);
    write_policy_tree(w, tree);
  }
  w.u32(batch_max_count);
  w.u64(batch_timeout_ms);
  const auto& roots = trusted_roots.all();
  w.u32(static_cast<uint32_t>(roots.size()));
  for (const auto& [name_, root] : roots) {
    w.str(root.name);
    w.str(root.org);
    w.u8(static_cast<uint8_t>(root.kind));
    w.blob(root.public_key);
  }
  return w.take();
}

Result<ChannelConfig> ChannelConfig::deserialize(const Bytes& raw) {
  wire::Reader r(raw);
  ChannelConfig c;
  if (auto v = r.str(); v) c.name = std::move(v).value(); else return v.error();
  auto nm = r.u32();
  if (!nm) return nm.error();
  for (uint32_t i = 0; i < nm.value(); ++i) {
    Member m;
    if (auto v = r.str(); v) m.org = std::move(v).value(); else return v.error();
    if (auto v = r.str(); v) m.anchor_peer = std::move(v).value(); else return v.error();
    c.members.push_back(std::move(m));
  }
  if (auto v = read_principals(r); v) c.policy_set.readers = std::move(v).value(); else return v.error();
  if (auto v = read_principals(r); v) c.policy_set.writers = std::move(v).value(); else return v.error();
  if (auto v = read_principals(r); v) c.policy_set.admins = std::move(v).value(); else return v.error();
  auto ncc = r.u32();
  if (!ncc) return ncc.error();
  for (uint32_t i = 0; i < ncc.value(); ++i) {
    auto cc = r.str();
    if (!cc) return cc.error();
    auto tree = read_policy_tree(r);
    if (!tree) return tree.error();
    c.chaincode_policies.emplace(std::move(cc).value(), std::move(tree).value());
  }
  if (auto v = r.u32(); v) c.batch_max_count = v.value(); else return v.error();
  if (auto v = r.u64(); v) c.batch_timeout_ms = v.value(); else return v.error();
  auto nr = r.u32();
  if (!nr) return nr.error();
  for (uint32_t i = 0; i < nr.value(); ++i) {
    membership::TrustedRoots::Root root;
    if (auto v = r.str(); v) root.name = std::move(v).value(); else return v.error();
    if (auto v = r.str(); v) root.org = std::move(v).value(); else return v.error();
    auto kind = r.u8();
    if (!kind) return kind.error();
    if (kind.value() > 1) return Error(Err::BadEncoding, "bad CA kind");
    root.kind = static_cast<CaKind>(kind.value());
    if (auto v = r.blob(); v) root.public_key = std::move(v).value(); else return v.error();
    if (auto a = c.trusted_roots.add(std::move(root)); !a) return a.error();
  }
  if (auto e = r.expect_end(); !e) return e.error();
  return c;
}

Bytes BlockDelivery::signing_payload(const ledger::BlockHeader& header) {
  auto bytes = ledger::canonical_serialize(header);
  return Bytes(bytes.begin(), bytes.end());
}

Result<ledger::Block> make_genesis_block(const ChannelConfig& config,
                                         const Credentials& creator, uint64_t now_ms,
                                         const tx::TxNonce& nonce) {
  if (auto v = config.validate(); !v) return v.error();
  if (!membership::validate_certificate(creator.identity, config.trusted_roots))
    return Error(Err::BadCertificate, "channel creator certificate does not validate");

  tx::Proposal p;
  p.channel = config.name;
  p.chaincode = "_config";
  p.function = "create";
  p.args.push_back(config.serialize());
  p.creator = creator.identity;
  p.tx_nonce = nonce;
  p.submitted_at_ms = now_ms;
  auto sig = membership::sign(creator.identity_keys.private_key, p.signing_payload());
  if (!sig) return sig.error();
  p.signature = std::move(sig).value();

  ledger::Block genesis;
  genesis.transactions.push_back(tx::TransactionEnvelope{std::move(p), {}});
  genesis.validity_flags.push_back(ledger::Validity::valid);
  genesis.header.number = 0;
  genesis.header.previous_hash = Digest::zero();
  genesis.header.data_hash = ledger::compute_data_hash(genesis.transactions);
  genesis.header.nonce = 0;
  genesis.header.timestamp_ms = now_ms;
  return genesis;
}

Result<ChannelConfig> config_from_genesis(const ledger::Block& genesis) {
  if (genesis.header.number != 0 || genesis.transactions.size() != 1 ||
      genesis.transactions[0].proposal.args.size() != 1)
    return Error(Err::InvalidConfig, "not a genesis block");
  return ChannelConfig::deserialize(genesis.transactions[0].proposal.args[0]);
}

Peer::Peer(std::string name, std::string org, std::string host_label, bool anchor,
           Credentials credentials)
    : name_(std::move(name)),
      org_(std::move(org)),
      host_(std::move(host_label)),
      anchor_(anchor),
      creds_(std::move(credentials)) {}

Peer::Channel* Peer::channel(const std::string& name) {
  auto it = channels_.find(name);
  return it == channels_.end() ? nullptr : &it->second;
}

const Peer::Channel* Peer::channel(const std::string& name) const {
  auto it = channels_.find(name);
  return it == channels_.end() ? nullptr : &it->second;
}

Bytes Peer::nonce_key(const tx::Proposal& proposal) {
  Bytes key = proposal.creator.public_key;
  key.insert(key.end(), proposal.tx_nonce.begin(), proposal.tx_nonce.end());
  return key;
}

Result<void> Peer::join_channel(const ChannelConfig& config, const ledger::Block& genesis,
                                std::unique_ptr<ledger::BlockStore> store) {
  if (auto v = config.validate(); !v) return v.error();
  if (channels_.count(config.name) > 0)
    return Error(Err::AlreadyRunning, name_ + " already joined " + config.name);
  if (!config.is_member(org_))
    return Error(Err::NotAMember, "org " + org_ + " is not a channel member");
  if (!membership::validate_certificate(creds_.identity, config.trusted_roots))
    return Error(Err::BadCertificate, "peer certificate does not validate against channel roots");
  if (creds_.identity.role != Role::peer)
    return Error(Err::BadCertificate, "joining requires a peer-role certificate");

  Channel ch;
  ch.config = config;
  ch.config_digest = config.digest();
  ch.store = store ? std::move(store) : std::make_unique<ledger::BlockStore>();

  if (ch.store->height() == 0) {
    if (auto a = ch.store->append(genesis); !a) return a.error();
  } else {
    // Resuming an existing chain: its genesis must carry this exact config.
    if (!ch.store->parseable(0))
      return Error(Err::BadEncoding, "persisted genesis does not parse");
    auto persisted = config_from_genesis(ch.store->at(0));
    if (!persisted) return persisted.error();
    if (persisted.value().digest() != ch.config_digest)
      return Error(Err::InvalidConfig, "persisted chain belongs to a different channel config");
  }

  // Rebuild world state and the replay-rejection set from the chain.
  for (uint64_t i = 0; i < ch.store->height(); ++i) {
    if (!ch.store->parseable(i))
      return Error(Err::BadEncoding, "block " + std::to_string(i) + " does not parse");
    const ledger::Block& b = ch.store->at(i);
    ledger::apply_writes(ch.world_state, b);
    for (const auto& env : b.transactions) ch.seen_nonces.insert(nonce_key(env.proposal));
  }

  channels_.emplace(config.name, std::move(ch));
  return {};
}

bool Peer::joined(const std::string& name) const { return channels_.count(name) > 0; }

Result<void> Peer::install_chaincode(const std::string& channel_name,
                                     std::shared_ptr<chaincode::Chaincode> contract) {
  Channel* ch = channel(channel_name);
  if (ch == nullptr) return Error(Err::NotAMember, name_ + " has not joined " + channel_name);
  ch->chaincodes[contract->name()] = std::move(contract);
  return {};
}

bool Peer::has_chaincode(const std::string& channel_name, const std::string& cc) const {
  const Channel* ch = channel(channel_name);
  return ch != nullptr && ch->chaincodes.count(cc) > 0;
}

Result<tx::Endorsement> Peer::endorse(const tx::Proposal& proposal) {
  Channel* ch = channel(proposal.channel);
  if (ch == nullptr)
    return Error(Err::NotAMember, name_ + " has not joined " + proposal.channel);

  if (!membership::validate_certificate(proposal.creator, ch->config.trusted_roots))
    return Error(Err::BadCertificate, "creator certificate does not validate");
  auto sig_ok =
      membership::verify(proposal.creator.public_key, proposal.signing_payload(),
                         proposal.signature);
  if (!sig_ok || !sig_ok.value())
    return Error(Err::BadCertificate, "proposal signature does not verify");

  policy::Identity creator = policy::Identity::from_certificate(proposal.creator);
  if (!policy::check_channel_access(ch->config.policy_set, creator, policy::Action::write))
    return Error(Err::AccessDenied, creator.subject + " lacks write access on " +
                                        proposal.channel);

  auto cc_it = ch->chaincodes.find(proposal.chaincode);
  if (cc_it == ch->chaincodes.end())
    return Error(Err::ChaincodeNotInstalled, proposal.chaincode + " not on " + name_);

  auto exec = chaincode::execute(*cc_it->second, proposal.function, proposal.args,
                                 ch->world_state, creator, proposal.submitted_at_ms);
  if (!exec) return exec.error();

  tx::Endorsement endorsement;
  endorsement.endorser = creds_.identity;
  endorsement.rwset = std::move(exec.value().rwset);
  endorsement.response = std::move(exec.value().response);
  auto payload =
      tx::Endorsement::signing_payload(proposal.digest(), endorsement.rwset, endorsement.response);
  auto esig = membership::sign(creds_.identity_keys.private_key, payload);
  if (!esig) return esig.error();
  endorsement.signature = std::move(esig).value();
  return endorsement;
}

ledger::Validity Peer::validate_tx(Channel& ch, const tx::TransactionEnvelope& env,
                                   uint64_t block_number, uint32_t tx_index) {
  const tx::Proposal& proposal = env.proposal;

  // 1. Creator signature and certificate.
  if (proposal.channel != ch.config.name) return ledger::Validity::invalid_signature;
  if (!membership::validate_certificate(proposal.creator, ch.config.trusted_roots))
    return ledger::Validity::invalid_signature;
  auto sig_ok = membership::verify(proposal.creator.public_key, proposal.signing_payload(),
                                   proposal.signature);
  if (!sig_ok || !sig_ok.value()) return ledger::Validity::invalid_signature;

  // 2. Replay: (creator, tx_nonce) must be fresh on this channel.
  if (ch.seen_nonces.count(nonce_key(proposal)) > 0)
    return ledger::Validity::invalid_signature;

  // 3. Endorsements: valid peer certificates, signatures over the agreed
  // rwset bytes, byte-identical rwsets, then the chaincode policy.
  if (env.endorsements.empty()) return ledger::Validity::invalid_endorsement;
  const Bytes agreed_rwset = env.endorsements.front().rwset.serialize();
  const Digest proposal_digest = proposal.digest();
  std::vector<policy::Identity> endorsers;
  for (const auto& e : env.endorsements) {
    if (e.rwset.serialize() != agreed_rwset) return ledger::Validity::invalid_endorsement;
    if (e.endorser.role != Role::peer) continue;
    if (!membership::validate_certificate(e.endorser, ch.config.trusted_roots)) continue;
    auto ok = membership::verify(
        e.endorser.public_key,
        tx::Endorsement::signing_payload(proposal_digest, e.rwset, e.response), e.signature);
    if (!ok || !ok.value()) continue;
    endorsers.push_back(policy::Identity::from_certificate(e.endorser));
  }
  auto policy_it = ch.config.chaincode_policies.find(proposal.chaincode);
  if (policy_it == ch.config.chaincode_policies.end())
    return ledger::Validity::invalid_endorsement;
  if (!policy::evaluate_endorsement(policy_it->second, endorsers))
    return ledger::Validity::invalid_endorsement;

  // 4. MVCC: every read version must still match current state, including
  // the writes of earlier VALID transactions in this same block.
  const tx::ReadWriteSet& rwset = env.endorsements.front().rwset;
  for (const auto& rd : rwset.reads) {
    const ledger::WorldState::Entry* cur = ch.world_state.get(rd.key);
    if (cur == nullptr) {
      if (rd.version.has_value()) return ledger::Validity::invalid_mvcc;
    } else {
      if (!rd.version.has_value() || *rd.version != cur->version)
        return ledger::Validity::invalid_mvcc;
    }
  }

  // Valid: apply writes so later transactions in this block see them.
  for (const auto& wr : rwset.writes) {
    if (wr.value)
      ch.world_state.put(wr.key, *wr.value, tx::Version{block_number, tx_index});
    else
      ch.world_state.erase(wr.key);
  }
  return ledger::Validity::valid;
}

Result<std::vector<CommitEvent>> Peer::deliver_block(const BlockDelivery& delivery) {
  Channel* ch = channel(delivery.channel);
  if (ch == nullptr)
    return Error(Err::NotAMember, name_ + " has not joined " + delivery.channel);

  // Delivery authenticity: orderer-role certificate from a member org.
  if (delivery.orderer_cert.role != Role::orderer ||
      !ch->config.is_member(delivery.orderer_cert.org) ||
      !membership::validate_certificate(delivery.orderer_cert, ch->config.trusted_roots))
    return Error(Err::BadCertificate, "block delivery certificate does not validate");
  auto sig_ok = membership::verify(delivery.orderer_cert.public_key,
                                   BlockDelivery::signing_payload(delivery.header),
                                   delivery.orderer_signature);
  if (!sig_ok || !sig_ok.value())
    return Error(Err::BadCertificate, "block delivery signature does not verify");

  // Whole-block checks: linkage against our tip, payload digest.
  if (delivery.header.number != ch->store->height())
    return Error(Err::BadHeight, "expected block " + std::to_string(ch->store->height()));
  if (delivery.header.previous_hash != ch->store->tip_hash())
    return Error(Err::BadLinkage, "previous_hash does not match tip");
  if (ledger::compute_data_hash(delivery.transactions) != delivery.header.data_hash)
    return Error(Err::BadDataHash, "payload digest does not match header");

  ledger::Block block;
  block.header = delivery.header;
  block.transactions = delivery.transactions;
  block.validity_flags.reserve(block.transactions.size());

  std::vector<CommitEvent> events;
  for (uint32_t i = 0; i < block.transactions.size(); ++i) {
    const auto& env = block.transactions[i];
    ledger::Validity flag = validate_tx(*ch, env, block.header.number, i);
    ch->seen_nonces.insert(nonce_key(env.proposal));
    block.validity_flags.push_back(flag);
    events.push_back(CommitEvent{delivery.channel, env.proposal.digest(),
                                 block.header.number, i, flag,
                                 /*commit_time_ms=*/0});
  }

  if (auto a = ch->store->append(std::move(block)); !a) return a.error();
  return events;
}

const ledger::BlockStore& Peer::store(const std::string& channel_name) const {
  const Channel* ch = channel(channel_name);
  if (ch == nullptr) throw DomainException(Error(Err::NotAMember, channel_name));
  return *ch->store;
}

const ledger::WorldState& Peer::state(const std::string& channel_name) const {
  const Channel* ch = channel(channel_name);
  if (ch == nullptr) throw DomainException(Error(Err::NotAMember, channel_name));
  return ch->world_state;
}

const ChannelConfig& Peer::channel_config(const std::string& channel_name) const {
  const Channel* ch = channel(channel_name);
  if (ch == nullptr) throw DomainException(Error(Err::NotAMember, channel_name));
  return ch->config;
}

Digest Peer::state_digest(const std::string& channel_name) const {
  return state(channel_name).digest();
}

Orderer::Orderer(std::string name, std::string org, std::string host_label,
                 Credentials credentials, uint64_t nonce_seed)
    : name_(std::move(name)),
      org_(std::move(org)),
      host_(std::move(host_label)),
      creds_(std::move(credentials)),
      nonce_rng_(nonce_seed) {}

Result<void> Orderer::open_channel(const ChannelConfig& config, const ledger::Block& genesis) {
  if (channels_.count(config.name) > 0)
    return Error(Err::AlreadyRunning, "channel exists: " + config.name);
  Channel ch;
  ch.config = config;
  ch.next_number = 1;
  ch.tip_hash = ledger::compute_block_hash(genesis.header);
  channels_.emplace(config.name, std::move(ch));
  return {};
}

Result<void> Orderer::sync_channel(const ChannelConfig& config, uint64_t height,
                                   Digest tip_hash) {
  if (height == 0) return Error(Err::InvalidConfig, "cannot sync an empty chain");
  if (channels_.count(config.name) > 0)
    return Error(Err::AlreadyRunning, "channel exists: " + config.name);
  Channel ch;
  ch.config = config;
  ch.next_number = height;
  ch.tip_hash = tip_hash;
  channels_.emplace(config.name, std::move(ch));
  return {};
}

Result<Digest> Orderer::submit(const tx::TransactionEnvelope& envelope, uint64_t arrival_ms) {
  auto it = channels_.find(envelope.proposal.channel);
  if (it == channels_.end())
    return Error(Err::NotAMember, "unknown channel: " + envelope.proposal.channel);
  Channel& ch = it->second;

  if (!membership::validate_certificate(envelope.proposal.creator, ch.config.trusted_roots))
    return Error(Err::BadCertificate, "creator certificate does not validate");
  auto sig_ok = membership::verify(envelope.proposal.creator.public_key,
                                   envelope.proposal.signing_payload(),
                                   envelope.proposal.signature);
  if (!sig_ok || !sig_ok.value())
    return Error(Err::BadCertificate, "proposal signature does not verify");

  Digest tx_id = envelope.proposal.digest();
  ch.queue.push_back(Queued{arrival_ms, tx_id, envelope});
  return tx_id;
}

uint32_t Orderer::batch_max_count(const std::string& channel) const {
  auto it = channels_.find(channel);
  return it == channels_.end() ? 1 : it->second.config.batch_max_count;
}

uint64_t Orderer::batch_timeout_ms(const std::string& channel) const {
  auto it = channels_.find(channel);
  return it == channels_.end() ? 0 : it->second.config.batch_timeout_ms;
}

size_t Orderer::queue_length(const std::string& channel) const {
  auto it = channels_.find(channel);
  return it == channels_.end() ? 0 : it->second.queue.size();
}

std::optional<uint64_t> Orderer::oldest_arrival_ms(const std::string& channel) const {
  auto it = channels_.find(channel);
  if (it == channels_.end() || it->second.queue.empty()) return std::nullopt;
  return it->second.queue.front().arrival_ms;
}

std::optional<BlockDelivery> Orderer::try_cut(const std::string& channel, uint64_t now_ms,
                                              bool timeout_elapsed) {
  auto it = channels_.find(channel);
  if (it == channels_.end()) return std::nullopt;
  Channel& ch = it->second;
  if (ch.queue.empty()) return std::nullopt;
  if (ch.queue.size() < ch.config.batch_max_count && !timeout_elapsed) return std::nullopt;

  // FIFO by arrival; simultaneous arrivals order by tx id for determinism.
  std::stable_sort(ch.queue.begin(), ch.queue.end(), [](const Queued& a, const Queued& b) {
    if (a.arrival_ms != b.arrival_ms) return a.arrival_ms < b.arrival_ms;
    return a.tx_id < b.tx_id;
  });

  size_t take = std::min<size_t>(ch.queue.size(), ch.config.batch_max_count);
  BlockDelivery delivery;
  delivery.channel = channel;
  for (size_t i = 0; i < take; ++i)
    delivery.transactions.push_back(std::move(ch.queue[i].envelope));
  ch.queue.erase(ch.queue.begin(), ch.queue.begin() + long(take));

  delivery.header.number = ch.next_number++;
  delivery.header.previous_hash = ch.tip_hash;
  delivery.header.data_hash = ledger::compute_data_hash(delivery.transactions);
  delivery.header.nonce = nonce_rng_.next_u64();
  delivery.header.timestamp_ms = now_ms;
  ch.tip_hash = ledger::compute_block_hash(delivery.header);

  delivery.orderer_cert = creds_.identity;
  auto sig = membership::sign(creds_.identity_keys.private_key,
                              BlockDelivery::signing_payload(delivery.header));
  if (!sig) return std::nullopt;  // key material is validated at construction
  delivery.orderer_signature = std::move(sig).value();
  return delivery;
}

Client::Client(SimNetwork& net, Credentials credentials, Peer* anchor)
    : net_(net), creds_(std::move(credentials)), anchor_(anchor) {}

tx::Proposal Client::make_proposal(const std::string& channel, const std::string& chaincode,
                                   const std::string& function, std::vector<Bytes> args) {
  tx::Proposal p;
  p.channel = channel;
  p.chaincode = chaincode;
  p.function = function;
  p.args = std::move(args);
  p.creator = creds_.identity;
  p.tx_nonce = net_.next_tx_nonce();
  p.submitted_at_ms = net_.loop().now_ms();
  auto sig = membership::sign(creds_.identity_keys.private_key, p.signing_payload());
  if (sig) p.signature = std::move(sig).value();
  return p;
}

void Client::invoke(const std::string& channel, const std::string& chaincode,
                    const std::string& function, std::vector<Bytes> args, CommitCallback cb) {
  submit_proposal(make_proposal(channel, chaincode, function, std::move(args)), std::move(cb));
}

void Client::submit_proposal(tx::Proposal proposal, CommitCallback cb) {
  auto targets = net_.endorsing_peers(proposal.channel, proposal.chaincode);
  if (targets.empty()) {
    cb(Error(Err::ChaincodeNotInstalled,
             proposal.chaincode + " is not installed on any channel peer"));
    return;
  }

  auto pending = std::make_shared<Pending>();
  pending->proposal = std::move(proposal);
  pending->cb = std::move(cb);
  pending->expected = targets.size();
  pending->submit_time_ms = net_.loop().now_ms();

  const std::string self = "id:" + creds_.identity.org + "/" + creds_.identity.subject;
  for (Peer* target : targets) {
    auto sent = net_.send_between(
        self, creds_, "peer:" + target->name(), target->credentials(),
        [this, pending, target, self] {
          auto response = target->endorse(pending->proposal);
          auto back = net_.send_between(
              "peer:" + target->name(), target->credentials(), self, creds_,
              [this, pending, response] {
                pending->responses.push_back(response);
                if (pending->responses.size() == pending->expected)
                  finish_endorsement(pending);
              });
          if (!back) {
            pending->responses.push_back(back.error());
            if (pending->responses.size() == pending->expected) finish_endorsement(pending);
          }
        });
    if (!sent) {
      pending->responses.push_back(sent.error());
      if (pending->responses.size() == pending->expected) finish_endorsement(pending);
    }
  }
}

void Client::finish_endorsement(const std::shared_ptr<Pending>& pending) {
  std::vector<tx::Endorsement> endorsements;
  std::optional<Error> first_error;
  for (const auto& r : pending->responses) {
    if (r.ok())
      endorsements.push_back(r.value());
    else if (!first_error)
      first_error = r.error();
  }
  if (endorsements.empty()) {
    pending->cb(first_error.value_or(Error(Err::AccessDenied, "no endorsements")));
    return;
  }

  // Assembly: all endorsements must carry identical rwset bytes.
  const Bytes agreed = endorsements.front().rwset.serialize();
  for (const auto& e : endorsements)
    if (e.rwset.serialize() != agreed) {
      pending->cb(Error(Err::DivergentEndorsements, "endorsements disagree on the rwset"));
      return;
    }

  // Client-side policy precheck; avoids shipping known-invalid envelopes.
  const ChannelConfig* config = net_.channel_config(pending->proposal.channel);
  if (config != nullptr) {
    auto policy_it = config->chaincode_policies.find(pending->proposal.chaincode);
    if (policy_it != config->chaincode_policies.end()) {
      std::vector<policy::Identity> ids;
      for (const auto& e : endorsements)
        ids.push_back(policy::Identity::from_certificate(e.endorser));
      if (!policy::evaluate_endorsement(policy_it->second, ids)) {
        pending->cb(first_error.value_or(
            Error(Err::AccessDenied, "endorsements do not satisfy the chaincode policy")));
        return;
      }
    }
  }

  tx::TransactionEnvelope envelope{pending->proposal, std::move(endorsements)};
  const std::string tx_key = pending->proposal.digest().hex();
  awaiting_commit_[tx_key] = pending;
  net_.submit_to_orderer(this, std::move(envelope), [this, tx_key](Result<CommitEvent> r) {
    auto it = awaiting_commit_.find(tx_key);
    if (it == awaiting_commit_.end()) return;
    auto p = it->second;
    awaiting_commit_.erase(it);
    p->cb(std::move(r));
  });
}

Result<Bytes> Client::query(const std::string& channel, const std::string& chaincode,
                            const std::string& function, std::vector<Bytes> args) {
  if (anchor_ == nullptr) return Error(Err::NetworkDown, "client has no anchor peer");
  const std::string self = "id:" + creds_.identity.org + "/" + creds_.identity.subject;
  // Handshake only; a query is a local read against the anchor peer.
  if (auto link = net_.ensure_link(self, creds_, "peer:" + anchor_->name(),
                                   anchor_->credentials());
      !link)
    return link.error();
  auto proposal = make_proposal(channel, chaincode, function, std::move(args));
  auto endorsement = anchor_->endorse(proposal);
  if (!endorsement) return endorsement.error();
  return endorsement.value().response;
}

void Client::on_commit(const CommitEvent& event) {
  auto it = awaiting_commit_.find(event.tx_id.hex());
  if (it == awaiting_commit_.end()) return;
  auto pending = it->second;
  awaiting_commit_.erase(it);
  CommitEvent resolved = event;
  resolved.commit_time_ms = net_.loop().now_ms();
  pending->cb(resolved);
}

SimNetwork::SimNetwork(uint64_t seed) : rng_(seed) {}

Peer* SimNetwork::add_peer(std::string name, std::string org, std::string host_label,
                           bool anchor, Credentials credentials) {
  peers_.push_back(
      std::make_unique<Peer>(std::move(name), std::move(org), std::move(host_label), anchor,
                             std::move(credentials)));
  return peers_.back().get();
}

Orderer* SimNetwork::set_orderer(std::string name, std::string org, std::string host_label,
                                 Credentials credentials) {
  orderer_ = std::make_unique<Orderer>(std::move(name), std::move(org), std::move(host_label),
                                       std::move(credentials), rng_.next_u64());
  return orderer_.get();
}

Peer* SimNetwork::peer(const std::string& name) {
  for (auto& p : peers_)
    if (p->name() == name) return p.get();
  return nullptr;
}

Client* SimNetwork::make_client(Credentials credentials, Peer* anchor) {
  clients_.push_back(std::make_unique<Client>(*this, std::move(credentials), anchor));
  return clients_.back().get();
}

Result<void> SimNetwork::create_channel(const ChannelConfig& config,
                                        const Credentials& creator) {
  if (orderer_ == nullptr) return Error(Err::NetworkDown, "no orderer configured");
  if (channels_.count(config.name) > 0)
    return Error(Err::AlreadyRunning, "channel exists: " + config.name);
  // Anchor peers named in the config must exist and belong to their org.
  for (const auto& m : config.members) {
    if (m.anchor_peer.empty()) continue;
    bool found = false;
    for (const auto& p : peers_)
      if (p->name() == m.anchor_peer && p->org() == m.org) found = true;
    if (!found)
      return Error(Err::InvalidConfig,
                   "anchor peer " + m.anchor_peer + " not found in org " + m.org);
  }
  auto genesis = make_genesis_block(config, creator, loop_.now_ms(), next_tx_nonce());
  if (!genesis) return genesis.error();
  if (auto o = orderer_->open_channel(config, genesis.value()); !o) return o.error();
  channels_.emplace(config.name, ChannelInfo{config, std::move(genesis).value(), {}, 0, false});
  return {};
}

Result<void> SimNetwork::adopt_channel(const ChannelConfig& config,
                                       const ledger::Block& genesis, uint64_t height,
                                       Digest tip_hash) {
  if (orderer_ == nullptr) return Error(Err::NetworkDown, "no orderer configured");
  if (auto v = config.validate(); !v) return v.error();
  if (auto o = orderer_->sync_channel(config, height, tip_hash); !o) return o.error();
  channels_.emplace(config.name, ChannelInfo{config, genesis, {}, 0, false});
  return {};
}

const ChannelConfig* SimNetwork::channel_config(const std::string& name) const {
  auto it = channels_.find(name);
  return it == channels_.end() ? nullptr : &it->second.config;
}

const ledger::Block* SimNetwork::genesis(const std::string& name) const {
  auto it = channels_.find(name);
  return it == channels_.end() ? nullptr : &it->second.genesis;
}

Result<void> SimNetwork::join(Peer* peer, const std::string& channel,
                              std::unique_ptr<ledger::BlockStore> store) {
  auto it = channels_.find(channel);
  if (it == channels_.end()) return Error(Err::InvalidConfig, "no such channel: " + channel);
  if (auto j = peer->join_channel(it->second.config, it->second.genesis, std::move(store)); !j)
    return j;
  it->second.joined.push_back(peer);
  return {};
}

Result<void> SimNetwork::install_chaincode(Peer* peer, const std::string& channel,
                                           std::shared_ptr<chaincode::Chaincode> contract) {
  return peer->install_chaincode(channel, std::move(contract));
}

std::vector<Peer*> SimNetwork::endorsing_peers(const std::string& channel,
                                               const std::string& chaincode) {
  std::vector<Peer*> out;
  auto it = channels_.find(channel);
  if (it == channels_.end()) return out;
  for (Peer* p : it->second.joined)
    if (p->has_chaincode(channel, chaincode)) out.push_back(p);
  return out;
}

Result<void> SimNetwork::ensure_link(const std::string& a, const Credentials& a_creds,
                                     const std::string& b, const Credentials& b_creds) {
  const std::string key = a < b ? a + "|" + b : b + "|" + a;
  auto it = links_.find(key);
  if (it != links_.end()) {
    if (it->second) return {};
    return Error(Err::BadCertificate, "link severed: " + key);
  }

  auto endpoint_ok = [&](const Credentials& c) {
    if (c.transport.has_value())
      return membership::validate_certificate(*c.transport, roots_, CaKind::transport);
    return membership::validate_certificate(c.identity, roots_, CaKind::identity);
  };
  bool ok = endpoint_ok(a_creds) && endpoint_ok(b_creds);
  links_[key] = ok;
  if (!ok) return Error(Err::BadCertificate, "transport handshake failed: " + key);
  return {};
}

Result<void> SimNetwork::send_between(const std::string& from, const Credentials& from_creds,
                                      const std::string& to, const Credentials& to_creds,
                                      sim::EventLoop::Fn fn) {
  if (auto link = ensure_link(from, from_creds, to, to_creds); !link) return link;
  loop_.schedule_in(link_latency_ms_, std::move(fn));
  return {};
}

void SimNetwork::submit_to_orderer(Client* from, tx::TransactionEnvelope envelope,
                                   const Client::CommitCallback& on_error) {
  if (orderer_ == nullptr) {
    on_error(Error(Err::NetworkDown, "no orderer configured"));
    return;
  }
  const auto& id = from->credentials().identity;
  const std::string self = "id:" + id.org + "/" + id.subject;
  auto env_ptr = std::make_shared<tx::TransactionEnvelope>(std::move(envelope));
  auto sent = send_between(
      self, from->credentials(), "orderer:" + orderer_->name(), orderer_->credentials(),
      [this, env_ptr, on_error] {
        const std::string channel = env_ptr->proposal.channel;
        auto submitted = orderer_->submit(*env_ptr, loop_.now_ms());
        if (!submitted) {
          on_error(submitted.error());
          return;
        }
        after_cut(channel);
      });
  if (!sent) on_error(sent.error());
}

Result<Digest> SimNetwork::raw_submit(const tx::TransactionEnvelope& envelope) {
  if (orderer_ == nullptr) return Error(Err::NetworkDown, "no orderer configured");
  auto submitted = orderer_->submit(envelope, loop_.now_ms());
  if (submitted) after_cut(envelope.proposal.channel);
  return submitted;
}

void SimNetwork::after_cut(const std::string& channel) {
  // Cut as long as full batches are waiting, then (re)arm the batch timer.
  while (true) {
    auto cut = orderer_->try_cut(channel, loop_.now_ms(), /*timeout_elapsed=*/false);
    if (!cut) break;
    deliver_cut(channel, std::move(*cut));
  }
  schedule_batch_timeout(channel);
}

void SimNetwork::schedule_batch_timeout(const std::string& channel) {
  auto it = channels_.find(channel);
  if (it == channels_.end()) return;
  ChannelInfo& info = it->second;
  auto oldest = orderer_->oldest_arrival_ms(channel);
  if (!oldest) {
    info.timeout_armed = false;
    return;
  }
  uint64_t epoch = ++info.timeout_epoch;
  info.timeout_armed = true;
  uint64_t fire_at =
      std::max(loop_.now_ms(), *oldest + orderer_->batch_timeout_ms(channel));
  loop_.schedule_at(fire_at, [this, channel, epoch] {
    auto ch_it = channels_.find(channel);
    if (ch_it == channels_.end() || ch_it->second.timeout_epoch != epoch) return;
    ch_it->second.timeout_armed = false;
    auto cut = orderer_->try_cut(channel, loop_.now_ms(), /*timeout_elapsed=*/true);
    if (cut) deliver_cut(channel, std::move(*cut));
    after_cut(channel);
  });
}

void SimNetwork::deliver_cut(const std::string& channel, BlockDelivery delivery) {
  auto it = channels_.find(channel);
  if (it == channels_.end()) return;
  auto delivery_ptr = std::make_shared<BlockDelivery>(std::move(delivery));
  for (Peer* peer : it->second.joined) {
    auto sent = send_between(
        "orderer:" + orderer_->name(), orderer_->credentials(), "peer:" + peer->name(),
        peer->credentials(), [this, peer, delivery_ptr] {
          auto events = peer->deliver_block(*delivery_ptr);
          if (!events) {
            std::fprintf(stderr, "[sim] %s rejected block %llu: %s\n", peer->name().c_str(),
                         static_cast<unsigned long long>(delivery_ptr->header.number),
                         events.error().to_string().c_str());
            return;
          }
          for (const auto& ev : events.value()) {
            for (auto& client : clients_) {
              if (client->anchor() != peer) continue;
              const auto& cid = client->credentials().identity;
              Client* target = client.get();
              CommitEvent event = ev;
              (void)send_between("peer:" + peer->name(), peer->credentials(),
                                 "id:" + cid.org + "/" + cid.subject, target->credentials(),
                                 [target, event] { target->on_commit(event); });
            }
          }
        });
    if (!sent)
      std::fprintf(stderr, "[sim] delivery to %s failed: %s\n", peer->name().c_str(),
                   sent.error().to_string().c_str());
  }
}

}  // namespace tamperled::net
