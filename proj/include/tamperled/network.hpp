#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tamperled/chaincode.hpp"
#include "tamperled/ledger.hpp"
#include "tamperled/membership.hpp"
#include "tamperled/policy.hpp"
#include "tamperled/sim.hpp"
#include "tamperled/tx.hpp"

namespace tamperled::net {

// Channel configuration: membership, policies, batching and trust anchors.
// Its canonical serialization is the genesis payload; the digest of those
// bytes is the channel's immutable anchor.
struct ChannelConfig {
  struct Member {
    std::string org;
    std::string anchor_peer;  // empty for orgs without peers (e.g. the orderer org)
  };

  std::string name;
  std::vector<Member> members;
  policy::ChannelPolicySet policy_set;
  std::map<std::string, policy::EndorsementPolicy> chaincode_policies;
  uint32_t batch_max_count = 10;
  uint64_t batch_timeout_ms = 500;
  membership::TrustedRoots trusted_roots;

  bool is_member(const std::string& org) const;
  Result<void> validate() const;

  Bytes serialize() const;
  static Result<ChannelConfig> deserialize(const Bytes& raw);
  Digest digest() const { return sha256(serialize()); }
};

// Identity material held by one actor. Peers and the orderer additionally
// hold a transport credential from their org's TLS CA.
struct Credentials {
  membership::Certificate identity;
  membership::KeyPair identity_keys;
  std::optional<membership::Certificate> transport;
  std::optional<membership::KeyPair> transport_keys;

  policy::Identity to_identity() const {
    return policy::Identity::from_certificate(identity);
  }
};

struct CommitEvent {
  std::string channel;
  Digest tx_id;
  uint64_t block_number = 0;
  uint32_t tx_index = 0;
  ledger::Validity flag = ledger::Validity::valid;
  uint64_t commit_time_ms = 0;
};

// A cut block on its way from the orderer to the peers: sealed header and
// ordered envelopes, no validity flags yet, signed by the orderer.
struct BlockDelivery {
  std::string channel;
  ledger::BlockHeader header;
  std::vector<tx::TransactionEnvelope> transactions;
  membership::Certificate orderer_cert;
  Bytes orderer_signature;  // over the header hash

  static Bytes signing_payload(const ledger::BlockHeader& header);
};

// Builds the signed genesis block holding the serialized channel config.
Result<ledger::Block> make_genesis_block(const ChannelConfig& config,
                                         const Credentials& creator, uint64_t now_ms,
                                         const tx::TxNonce& nonce);

// Extracts the config back out of a genesis block (resume path).
Result<ChannelConfig> config_from_genesis(const ledger::Block& genesis);

// Committing peer: hosts per-channel ledger, world state and installed
// chaincode; endorses proposals and validates/commits delivered blocks.
class Peer {
 public:
  Peer(std::string name, std::string org, std::string host_label, bool anchor,
       Credentials credentials);

  const std::string& name() const { return name_; }
  const std::string& org() const { return org_; }
  const std::string& host_label() const { return host_; }
  bool is_anchor() const { return anchor_; }
  const Credentials& credentials() const { return creds_; }

  // Validates the peer's own certificate against the channel roots, checks
  // membership, installs the genesis (or resumes from a pre-loaded store).
  Result<void> join_channel(const ChannelConfig& config, const ledger::Block& genesis,
                            std::unique_ptr<ledger::BlockStore> store = nullptr);
  bool joined(const std::string& channel) const;

  Result<void> install_chaincode(const std::string& channel,
                                 std::shared_ptr<chaincode::Chaincode> contract);
  bool has_chaincode(const std::string& channel, const std::string& name) const;

  // Speculative execution against current committed state; buffered writes
  // are never applied here.
  Result<tx::Endorsement> endorse(const tx::Proposal& proposal);

  // Full validation pipeline per envelope: signature, replay, endorsement
  // policy, MVCC; then append + state update. Rejects the whole block on bad
  // linkage.
  Result<std::vector<CommitEvent>> deliver_block(const BlockDelivery& delivery);

  const ledger::BlockStore& store(const std::string& channel) const;
  const ledger::WorldState& state(const std::string& channel) const;
  const ChannelConfig& channel_config(const std::string& channel) const;
  Digest state_digest(const std::string& channel) const;

 private:
  struct Channel {
    ChannelConfig config;
    Digest config_digest;
    std::unique_ptr<ledger::BlockStore> store;
    ledger::WorldState world_state;
    std::set<Bytes> seen_nonces;  // creator public key || tx nonce
    std::map<std::string, std::shared_ptr<chaincode::Chaincode>> chaincodes;
  };

  Channel* channel(const std::string& name);
  const Channel* channel(const std::string& name) const;
  ledger::Validity validate_tx(Channel& ch, const tx::TransactionEnvelope& env,
                               uint64_t block_number, uint32_t tx_index);
  static Bytes nonce_key(const tx::Proposal& proposal);

  std::string name_;
  std::string org_;
  std::string host_;
  bool anchor_;
  Credentials creds_;
  std::map<std::string, Channel> channels_;
};

// Solo ordering service: FIFO queue per channel, cuts on batch size or batch
// timeout, seals headers with a random nonce, keeps the header chain tip.
class Orderer {
 public:
  Orderer(std::string name, std::string org, std::string host_label, Credentials credentials,
          uint64_t nonce_seed);

  const std::string& name() const { return name_; }
  const std::string& org() const { return org_; }
  const Credentials& credentials() const { return creds_; }

  Result<void> open_channel(const ChannelConfig& config, const ledger::Block& genesis);
  // Resume an existing chain: adopt its height and tip.
  Result<void> sync_channel(const ChannelConfig& config, uint64_t height, Digest tip_hash);

  // Validates creator credentials and signature, then enqueues.
  // Returns the transaction id.
  Result<Digest> submit(const tx::TransactionEnvelope& envelope, uint64_t arrival_ms);

  uint32_t batch_max_count(const std::string& channel) const;
  uint64_t batch_timeout_ms(const std::string& channel) const;
  size_t queue_length(const std::string& channel) const;
  // Logical time at which the oldest queued envelope arrived, if any.
  std::optional<uint64_t> oldest_arrival_ms(const std::string& channel) const;

  // Cuts a block if the queue is non-empty and either the batch is full or
  // `timeout_elapsed` is set. Ties on arrival time order by tx id.
  std::optional<BlockDelivery> try_cut(const std::string& channel, uint64_t now_ms,
                                       bool timeout_elapsed);

 private:
  struct Queued {
    uint64_t arrival_ms;
    Digest tx_id;
    tx::TransactionEnvelope envelope;
  };
  struct Channel {
    ChannelConfig config;
    uint64_t next_number = 1;
    Digest tip_hash;
    std::vector<Queued> queue;
  };

  std::string name_;
  std::string org_;
  std::string host_;
  Credentials creds_;
  sim::Rng nonce_rng_;
  std::map<std::string, Channel> channels_;
};

class SimNetwork;

// Client handle bound to one identity and one anchor peer. invoke() drives
// the execute-order-validate pipeline; query() is an endorse-only local read.
class Client {
 public:
  using CommitCallback = std::function<void(Result<CommitEvent>)>;

  Client(SimNetwork& net, Credentials credentials, Peer* anchor);

  const Credentials& credentials() const { return creds_; }
  Peer* anchor() const { return anchor_; }
  const std::string& name() const { return creds_.identity.subject; }

  // Builds and signs a proposal stamped with the current logical time.
  tx::Proposal make_proposal(const std::string& channel, const std::string& chaincode,
                             const std::string& function, std::vector<Bytes> args);

  void invoke(const std::string& channel, const std::string& chaincode,
              const std::string& function, std::vector<Bytes> args, CommitCallback cb);
  // Submit a pre-built proposal through the full pipeline.
  void submit_proposal(tx::Proposal proposal, CommitCallback cb);

  Result<Bytes> query(const std::string& channel, const std::string& chaincode,
                      const std::string& function, std::vector<Bytes> args);

  void on_commit(const CommitEvent& event);

 private:
  friend class SimNetwork;
  struct Pending {
    tx::Proposal proposal;
    CommitCallback cb;
    std::vector<Result<tx::Endorsement>> responses;
    size_t expected = 0;
    uint64_t submit_time_ms = 0;
  };

  void finish_endorsement(const std::shared_ptr<Pending>& pending);

  SimNetwork& net_;
  Credentials creds_;
  Peer* anchor_;
  std::map<std::string, std::shared_ptr<Pending>> awaiting_commit_;  // by tx id hex
};

// In-process simulated network: owns the loop, actors, CAs and channels and
// wires messages between actors with a fixed link latency after a one-time
// transport handshake per actor pair.
class SimNetwork {
 public:
  explicit SimNetwork(uint64_t seed = 1);

  sim::EventLoop& loop() { return loop_; }
  sim::Rng& rng() { return rng_; }
  membership::CaRegistry& cas() { return cas_; }
  const membership::TrustedRoots& roots() const { return roots_; }
  void refresh_roots() { roots_ = cas_.roots(); }

  uint64_t link_latency_ms() const { return link_latency_ms_; }
  void set_link_latency_ms(uint64_t ms) { link_latency_ms_ = ms; }

  Peer* add_peer(std::string name, std::string org, std::string host_label, bool anchor,
                 Credentials credentials);
  Orderer* set_orderer(std::string name, std::string org, std::string host_label,
                       Credentials credentials);
  Orderer* orderer() { return orderer_.get(); }
  Peer* peer(const std::string& name);
  const std::vector<std::unique_ptr<Peer>>& peers() const { return peers_; }

  Client* make_client(Credentials credentials, Peer* anchor);

  // Creates the channel via the orderer, produces the genesis block.
  Result<void> create_channel(const ChannelConfig& config, const Credentials& creator);
  // Resume path: adopt an existing chain as the channel's canonical history.
  Result<void> adopt_channel(const ChannelConfig& config, const ledger::Block& genesis,
                             uint64_t height, Digest tip_hash);
  const ChannelConfig* channel_config(const std::string& name) const;
  const ledger::Block* genesis(const std::string& name) const;

  Result<void> join(Peer* peer, const std::string& channel,
                    std::unique_ptr<ledger::BlockStore> store = nullptr);
  Result<void> install_chaincode(Peer* peer, const std::string& channel,
                                 std::shared_ptr<chaincode::Chaincode> contract);

  std::vector<Peer*> endorsing_peers(const std::string& channel, const std::string& chaincode);

  // Transport handshake: each endpoint presents its transport certificate
  // (peers, orderer) or its identity certificate (clients, devices); a failed
  // verification severs the link permanently.
  Result<void> ensure_link(const std::string& a, const Credentials& a_creds,
                           const std::string& b, const Credentials& b_creds);

  // Schedules `fn` after the link latency; fails without scheduling when the
  // handshake fails.
  Result<void> send_between(const std::string& from, const Credentials& from_creds,
                            const std::string& to, const Credentials& to_creds,
                            sim::EventLoop::Fn fn);

  // Orderer-side intake used by clients; schedules block cutting.
  void submit_to_orderer(Client* from, tx::TransactionEnvelope envelope,
                         const Client::CommitCallback& on_error);

  tx::TxNonce next_tx_nonce() { return rng_.bytes<tx::kTxNonceSize>(); }

  // Drains scheduled work.
  void run() { loop_.run_until_idle(); }

  // Test/ops seam: enqueue without client-side checks (the commit pipeline
  // must still reject bad envelopes).
  Result<Digest> raw_submit(const tx::TransactionEnvelope& envelope);

 private:
  void deliver_cut(const std::string& channel, BlockDelivery delivery);
  void schedule_batch_timeout(const std::string& channel);
  void after_cut(const std::string& channel);

  sim::EventLoop loop_;
  sim::Rng rng_;
  membership::CaRegistry cas_;
  membership::TrustedRoots roots_;
  uint64_t link_latency_ms_ = 1;

  std::vector<std::unique_ptr<Peer>> peers_;
  std::unique_ptr<Orderer> orderer_;
  std::vector<std::unique_ptr<Client>> clients_;

  struct ChannelInfo {
    ChannelConfig config;
    ledger::Block genesis;
    std::vector<Peer*> joined;
    uint64_t timeout_epoch = 0;
    bool timeout_armed = false;
  };
  std::map<std::string, ChannelInfo> channels_;

  std::map<std::string, bool> links_;  // "a|b" -> established
};

}  // namespace tamperled::net
