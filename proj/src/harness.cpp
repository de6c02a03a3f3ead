#include "tamperled/harness.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tamperled/silomonitor.hpp"
#include "tamperled/wire.hpp"

namespace tamperled::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;
using membership::CaKind;
using membership::Role;

namespace {

std::array<uint8_t, membership::kSeedSize> derive_seed(uint64_t master,
                                                       const std::string& label) {
  wire::Writer w;
  w.u64(master);
  w.str(label);
  return sha256(w.bytes()).bytes;
}

Result<void> write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out.good()) return Error(Err::Io, "cannot write " + path.string());
  out << text;
  return {};
}

Result<std::string> read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in.good()) return Error(Err::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result<void> save_credentials(const fs::path& dir, const std::string& subject,
                              const net::Credentials& creds) {
  auto cert_path = dir / (subject + ".cert");
  std::ofstream cert(cert_path, std::ios::binary | std::ios::trunc);
  if (!cert.good()) return Error(Err::Io, "cannot write " + cert_path.string());
  Bytes raw = creds.identity.serialize();
  cert.write(reinterpret_cast<const char*>(raw.data()), long(raw.size()));

  json j{{"subject", subject},
         {"identity_sk", to_hex(creds.identity_keys.private_key)},
         {"identity_pk", to_hex(creds.identity_keys.public_key)}};
  if (creds.transport) {
    j["transport_cert"] = to_hex(creds.transport->serialize());
    j["transport_sk"] = to_hex(creds.transport_keys->private_key);
    j["transport_pk"] = to_hex(creds.transport_keys->public_key);
  }
  return write_file(dir / (subject + ".key"), j.dump(2));
}

Result<net::Credentials> load_credentials(const fs::path& dir, const std::string& subject) {
  auto raw = read_file(dir / (subject + ".cert"));
  if (!raw) return raw.error();
  auto cert = membership::Certificate::deserialize(to_bytes(raw.value()));
  if (!cert) return cert.error();

  auto key_text = read_file(dir / (subject + ".key"));
  if (!key_text) return key_text.error();
  json j = json::parse(key_text.value(), nullptr, false);
  if (j.is_discarded()) return Error(Err::Io, "corrupt key file for " + subject);

  net::Credentials creds;
  creds.identity = std::move(cert).value();
  auto sk = from_hex(j["identity_sk"].get<std::string>());
  auto pk = from_hex(j["identity_pk"].get<std::string>());
  if (!sk || !pk) return Error(Err::MalformedKey, "corrupt key hex for " + subject);
  creds.identity_keys = {std::move(*pk), std::move(*sk)};
  if (j.contains("transport_cert")) {
    auto traw = from_hex(j["transport_cert"].get<std::string>());
    if (!traw) return Error(Err::Io, "corrupt transport cert for " + subject);
    auto tcert = membership::Certificate::deserialize(*traw);
    if (!tcert) return tcert.error();
    creds.transport = std::move(tcert).value();
    auto tsk = from_hex(j["transport_sk"].get<std::string>());
    auto tpk = from_hex(j["transport_pk"].get<std::string>());
    if (!tsk || !tpk) return Error(Err::MalformedKey, "corrupt transport keys");
    creds.transport_keys = membership::KeyPair{std::move(*tpk), std::move(*tsk)};
  }
  return creds;
}

// Channel config assembled from the harness config sections.
Result<net::ChannelConfig> build_channel_config(const cfg::HarnessConfig& config,
                                                const cfg::ChannelSpec& spec,
                                                const membership::CaRegistry& cas) {
  net::ChannelConfig cc;
  cc.name = spec.name;
  cc.batch_max_count = spec.batch_max_count;
  cc.batch_timeout_ms = spec.batch_timeout_ms;

  for (const auto& member : spec.members) {
    net::ChannelConfig::Member m;
    m.org = member;
    for (const auto& p : config.peers)
      if (p.org == member && p.anchor) m.anchor_peer = p.name;
    cc.members.push_back(std::move(m));
  }

  auto parse_list = [](const std::vector<std::string>& in,
                       std::vector<policy::Principal>& out) -> Result<void> {
    for (const auto& s : in) {
      auto p = policy::parse_principal(s);
      if (!p) return p.error();
      out.push_back(std::move(p).value());
    }
    return {};
  };
  if (auto r = parse_list(spec.readers, cc.policy_set.readers); !r) return r.error();
  if (auto r = parse_list(spec.writers, cc.policy_set.writers); !r) return r.error();
  if (auto r = parse_list(spec.admins, cc.policy_set.admins); !r) return r.error();

  for (const auto& ccs : spec.chaincodes) {
    auto tree = policy::parse_policy(ccs.endorsement);
    if (!tree) return tree.error();
    cc.chaincode_policies.emplace(ccs.name, std::move(tree).value());
  }

  // Trust anchors: both CA roots of every member org.
  for (const auto& member : spec.members) {
    const cfg::OrgSpec* org = config.org(member);
    if (org == nullptr) return Error(Err::ConfigError, "unknown member org: " + member);
    for (const auto& ca_name : {org->identity_ca.name, org->transport_ca.name}) {
      auto it = cas.roots().find(ca_name);
      if (it == nullptr) return Error(Err::ConfigError, "missing CA: " + ca_name);
      if (auto a = cc.trusted_roots.add(*it); !a) return a.error();
    }
  }
  return cc;
}

std::shared_ptr<chaincode::Chaincode> make_contract(const std::string& name) {
  if (name == silo::SiloMonitor::kName) return std::make_shared<silo::SiloMonitor>();
  return nullptr;
}

}  // namespace

std::filesystem::path channel_store_dir(const fs::path& state_dir, const std::string& channel) {
  return state_dir / "channels" / channel;
}

Result<fs::path> RunningNetwork::channel_dir(const std::string& channel) const {
  if (state_dir.empty()) return Error(Err::Io, "network has no state directory");
  return channel_store_dir(state_dir, channel);
}

Result<net::CommitEvent> invoke_and_wait(RunningNetwork& run, net::Client* client,
                                         const std::string& channel,
                                         const std::string& chaincode,
                                         const std::string& function,
                                         std::vector<Bytes> args) {
  std::optional<Result<net::CommitEvent>> outcome;
  client->invoke(channel, chaincode, function, std::move(args),
                 [&outcome](Result<net::CommitEvent> r) { outcome = std::move(r); });
  run.net->run();
  if (!outcome) return Error(Err::NetworkDown, "invoke did not resolve");
  return *outcome;
}

namespace {

// Shared by netup and resume: actors, channels, joins, installs.
struct Assembly {
  RunningNetwork run;
  std::map<std::string, net::Credentials> peer_creds;
  net::Credentials orderer_creds;
  net::Credentials orderer_admin;
};

Result<void> build_actors(Assembly& a, bool issue_fresh) {
  auto& config = a.run.config;
  auto& net = *a.run.net;

  if (issue_fresh) {
    // CAs with deterministic keys derived from the master seed.
    for (const auto& org : config.organizations) {
      for (auto [spec, kind] :
           {std::pair<const cfg::CaSpec*, CaKind>{&org.identity_ca, CaKind::identity},
            {&org.transport_ca, CaKind::transport}}) {
        auto kp = membership::generate_keypair(derive_seed(config.seed, "ca/" + spec->name));
        auto ca = net.cas().create(spec->name, org.name, kind, std::move(kp));
        if (!ca) return ca.error();
        ca.value()->set_key_derivation_seed(derive_seed(config.seed, "sub/" + spec->name));
      }
    }
    net.refresh_roots();

    auto issue = [&](const std::string& org_name, const std::string& subject, Role role,
                     std::map<std::string, std::string> attrs,
                     bool with_transport) -> Result<net::Credentials> {
      auto* identity_ca = net.cas().find(org_name, CaKind::identity);
      if (identity_ca == nullptr)
        return Error(Err::ConfigError, "no identity CA for org " + org_name);
      auto issued = identity_ca->issue(subject, role, std::move(attrs));
      if (!issued) return issued.error();
      net::Credentials creds;
      creds.identity = std::move(issued.value().certificate);
      creds.identity_keys = std::move(issued.value().keypair);
      if (with_transport) {
        auto* transport_ca = net.cas().find(org_name, CaKind::transport);
        if (transport_ca == nullptr)
          return Error(Err::ConfigError, "no transport CA for org " + org_name);
        auto tissued = transport_ca->issue(subject, role);
        if (!tissued) return tissued.error();
        creds.transport = std::move(tissued.value().certificate);
        creds.transport_keys = std::move(tissued.value().keypair);
      }
      return creds;
    };

    for (const auto& p : config.peers) {
      auto creds = issue(p.org, p.name, Role::peer, {}, /*with_transport=*/true);
      if (!creds) return creds.error();
      a.peer_creds[p.name] = std::move(creds).value();
    }
    {
      auto creds = issue(config.orderer.org, config.orderer.name, Role::orderer, {},
                         /*with_transport=*/true);
      if (!creds) return creds.error();
      a.orderer_creds = std::move(creds).value();
    }
    for (const auto& id : config.identities) {
      auto role = membership::role_from_name(id.role);
      if (!role) return Error(Err::ConfigError, "bad role: " + id.role);
      auto creds = issue(id.org, id.subject, *role, id.attributes, /*with_transport=*/false);
      if (!creds) return creds.error();
      a.run.credentials[id.subject] = std::move(creds).value();
    }
  }

  // Locate the orderer-org admin used as the channel creator.
  for (const auto& id : config.identities)
    if (id.org == config.orderer.org && id.role == "admin") {
      a.orderer_admin = a.run.credentials.at(id.subject);
      break;
    }

  for (const auto& p : config.peers)
    net.add_peer(p.name, p.org, p.host, p.anchor, a.peer_creds.at(p.name));
  net.set_orderer(config.orderer.name, config.orderer.org, config.orderer.host,
                  a.orderer_creds);
  return {};
}

net::Peer* anchor_for_org(net::SimNetwork& net, const cfg::HarnessConfig& config,
                          const std::string& org) {
  for (const auto& p : config.peers)
    if (p.org == org && p.anchor)
      if (auto* peer = net.peer(p.name)) return peer;
  return net.peers().empty() ? nullptr : net.peers().front().get();
}

Result<void> make_clients(Assembly& a) {
  auto& config = a.run.config;
  for (const auto& id : config.identities) {
    auto role = membership::role_from_name(id.role);
    if (!role) continue;
    if (*role == Role::peer || *role == Role::orderer) continue;
    net::Peer* anchor = anchor_for_org(*a.run.net, config, id.org);
    a.run.clients[id.subject] =
        a.run.net->make_client(a.run.credentials.at(id.subject), anchor);
  }
  for (const auto& d : config.devices) {
    auto it = a.run.clients.find(d.identity);
    if (it == a.run.clients.end())
      return Error(Err::ConfigError, "device identity has no client: " + d.identity);
    a.run.device_clients[d.device_id] = it->second;
  }
  return {};
}

Result<void> install_contracts(Assembly& a, const std::string& channel,
                               const cfg::ChannelSpec& spec) {
  for (const auto& cc : spec.chaincodes) {
    auto contract = make_contract(cc.name);
    if (contract == nullptr)
      return Error(Err::ConfigError, "no such chaincode implementation: " + cc.name);
    std::vector<std::string> targets = cc.install_on;
    if (targets.empty())
      for (const auto& p : a.run.config.peers) targets.push_back(p.name);
    for (const auto& peer_name : targets) {
      net::Peer* peer = a.run.net->peer(peer_name);
      if (peer == nullptr) return Error(Err::ConfigError, "unknown peer: " + peer_name);
      if (!peer->joined(channel)) continue;
      if (auto i = a.run.net->install_chaincode(peer, channel, contract); !i) return i;
    }
  }
  return {};
}

Result<void> register_devices(Assembly& a) {
  auto& config = a.run.config;
  if (config.devices.empty()) return {};
  // The contract requires the owning organization's admin.
  net::Client* admin = nullptr;
  for (const auto& id : config.identities)
    if (id.org == silo::SiloMonitor::kOwnerOrg && id.role == "admin")
      admin = a.run.clients.at(id.subject);
  if (admin == nullptr)
    return Error(Err::ConfigError,
                 "devices are configured but no IoT admin identity exists");

  const std::string channel = config.channels.front().name;
  for (const auto& d : config.devices) {
    // Skip devices that are already registered (resume path).
    net::Peer* anchor = admin->anchor();
    if (anchor != nullptr && anchor->joined(channel) &&
        anchor->state(channel).get(silo::device_key(d.device_id)) != nullptr)
      continue;
    auto done = invoke_and_wait(a.run, admin, channel, silo::SiloMonitor::kName,
                                "RegisterDevice",
                                {to_bytes(d.device_id), to_bytes(d.owner_org)});
    if (!done) return done.error();
    if (done.value().flag != ledger::Validity::valid)
      return Error(Err::PreparationFailed, "device registration committed as " +
                                               std::string(ledger::validity_name(
                                                   done.value().flag)));
  }
  for (const auto& g : config.grants) {
    auto done = invoke_and_wait(a.run, admin, channel, silo::SiloMonitor::kName,
                                "GrantAccess",
                                {to_bytes(g.device_id), to_bytes(g.org), to_bytes(g.subject)});
    if (!done) return done.error();
    if (done.value().flag != ledger::Validity::valid)
      return Error(Err::PreparationFailed, "grant committed as " +
                                               std::string(ledger::validity_name(
                                                   done.value().flag)));
  }
  return {};
}

}  // namespace

Result<RunningNetwork> netup(const cfg::HarnessConfig& config, const fs::path& state_dir) {
  if (auto v = config.validate(); !v) return v.error();

  if (!state_dir.empty()) {
    if (fs::exists(state_dir / kConfigFileName) || fs::exists(state_dir / "channels"))
      return Error(Err::AlreadyRunning, "state directory already holds a network: " +
                                            state_dir.string());
    std::error_code ec;
    fs::create_directories(state_dir / "identities", ec);
    fs::create_directories(state_dir / "reports", ec);
    if (ec) return Error(Err::Io, "cannot create state directory");
  }

  Assembly a;
  a.run.config = config;
  a.run.state_dir = state_dir;
  a.run.net = std::make_unique<net::SimNetwork>(config.seed);
  a.run.net->set_link_latency_ms(config.link_latency_ms);

  if (auto b = build_actors(a, /*issue_fresh=*/true); !b) return b.error();

  for (const auto& spec : config.channels) {
    auto cc = build_channel_config(config, spec, a.run.net->cas());
    if (!cc) return cc.error();
    if (auto c = a.run.net->create_channel(cc.value(), a.orderer_admin); !c) return c.error();

    bool first_member_peer = true;
    for (const auto& p : config.peers) {
      if (!cc.value().is_member(p.org)) continue;
      net::Peer* peer = a.run.net->peer(p.name);
      std::unique_ptr<ledger::BlockStore> store;
      if (!state_dir.empty() && first_member_peer) {
        // The first configured member peer persists the channel's canonical
        // chain; the others hold identical in-memory copies.
        auto opened = ledger::BlockStore::open(channel_store_dir(state_dir, spec.name));
        if (!opened) return opened.error();
        store = std::move(opened).value();
      }
      first_member_peer = false;
      if (auto j = a.run.net->join(peer, spec.name, std::move(store)); !j) return j.error();
    }
    if (auto i = install_contracts(a, spec.name, spec); !i) return i;
  }

  if (auto c = make_clients(a); !c) return c.error();
  if (auto r = register_devices(a); !r) return r.error();

  if (!state_dir.empty()) {
    json copy = json::parse(json::parse(R"({})").dump());  // placeholder replaced below
    (void)copy;
    auto cfg_text = read_file(state_dir / kConfigFileName);
    (void)cfg_text;
  }

  return std::move(a.run);
}

Result<RunningNetwork> resume(const fs::path& state_dir) {
  auto cfg_text = read_file(state_dir / kConfigFileName);
  if (!cfg_text) return Error(Err::NetworkDown, "no network in " + state_dir.string() +
                                                    " (run netup first)");
  auto config = cfg::HarnessConfig::parse(cfg_text.value());
  if (!config) return config.error();
  if (auto v = config.value().validate(); !v) return v.error();

  Assembly a;
  a.run.config = std::move(config).value();
  a.run.state_dir = state_dir;

  // Re-seed the nonce stream from the persisted chain positions so resumed
  // sessions never reuse a previous session's proposal nonces.
  uint64_t mix = a.run.config.seed;
  for (const auto& spec : a.run.config.channels) {
    auto frames = blockfile::scan_and_recover(channel_store_dir(state_dir, spec.name));
    if (frames) mix = mix * 1099511628211ULL + frames.value().size();
  }
  a.run.net = std::make_unique<net::SimNetwork>(mix);
  a.run.net->set_link_latency_ms(a.run.config.link_latency_ms);

  // Restore CA material and credentials.
  const fs::path iddir = state_dir / "identities";
  auto ca_text = read_file(iddir / "cas.json");
  if (!ca_text) return ca_text.error();
  json cas = json::parse(ca_text.value(), nullptr, false);
  if (cas.is_discarded()) return Error(Err::Io, "corrupt cas.json");
  for (const auto& c : cas) {
    auto sk = from_hex(c["sk"].get<std::string>());
    auto pk = from_hex(c["pk"].get<std::string>());
    if (!sk || !pk) return Error(Err::MalformedKey, "corrupt CA keys");
    auto kind = c["kind"].get<std::string>() == "identity" ? CaKind::identity
                                                           : CaKind::transport;
    auto ca = a.run.net->cas().create(c["name"].get<std::string>(),
                                      c["org"].get<std::string>(), kind,
                                      membership::KeyPair{*pk, *sk});
    if (!ca) return ca.error();
    ca.value()->set_key_derivation_seed(
        derive_seed(mix, "sub/" + c["name"].get<std::string>()));
  }
  a.run.net->refresh_roots();

  for (const auto& p : a.run.config.peers) {
    auto creds = load_credentials(iddir, p.name);
    if (!creds) return creds.error();
    a.peer_creds[p.name] = std::move(creds).value();
  }
  {
    auto creds = load_credentials(iddir, a.run.config.orderer.name);
    if (!creds) return creds.error();
    a.orderer_creds = std::move(creds).value();
  }
  for (const auto& id : a.run.config.identities) {
    auto creds = load_credentials(iddir, id.subject);
    if (!creds) return creds.error();
    a.run.credentials[id.subject] = std::move(creds).value();
  }

  if (auto b = build_actors(a, /*issue_fresh=*/false); !b) return b.error();

  for (const auto& spec : a.run.config.channels) {
    auto opened = ledger::BlockStore::open(channel_store_dir(state_dir, spec.name));
    if (!opened) return opened.error();
    auto& store = opened.value();
    if (store->height() == 0)
      return Error(Err::NetworkDown, "channel " + spec.name + " has no chain");
    auto verdict = store->verify();
    if (!verdict.ok)
      return Error(Err::BadDataHash, "refusing to operate on a tampered chain: " +
                                         verdict.to_string());
    if (!store->parseable(0)) return Error(Err::BadEncoding, "genesis does not parse");
    auto cc = net::config_from_genesis(store->at(0));
    if (!cc) return cc.error();

    Digest tip = ledger::compute_block_hash(store->at(store->height() - 1).header);
    if (auto ad = a.run.net->adopt_channel(cc.value(), store->at(0), store->height(), tip); !ad)
      return ad.error();

    bool first_member_peer = true;
    for (const auto& p : a.run.config.peers) {
      if (!cc.value().is_member(p.org)) continue;
      net::Peer* peer = a.run.net->peer(p.name);
      std::unique_ptr<ledger::BlockStore> peer_store;
      if (first_member_peer) {
        peer_store = std::move(store);
      } else {
        // In-memory replica of the persisted chain.
        peer_store = std::make_unique<ledger::BlockStore>();
        const auto& writer = a.run.net->peer(a.run.config.peers.front().name)
                                 ->store(spec.name);
        for (uint64_t i = 0; i < writer.height(); ++i)
          if (auto ap = peer_store->append(writer.at(i)); !ap) return ap.error();
      }
      first_member_peer = false;
      if (auto j = a.run.net->join(peer, spec.name, std::move(peer_store)); !j)
        return j.error();
    }
    if (auto i = install_contracts(a, spec.name, spec); !i) return i;
  }

  if (auto c = make_clients(a); !c) return c.error();
  return std::move(a.run);
}

}  // namespace tamperled::harness
