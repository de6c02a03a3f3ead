#include "tamperled/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tamperled/membership.hpp"
#include "tamperled/policy.hpp"
#include "tamperled/silomonitor.hpp"

namespace tamperled::cfg {

using json = nlohmann::json;

namespace {

Error bad(const std::string& path, const std::string& why) {
  return Error(Err::ConfigError, path + ": " + why);
}

Result<std::string> need_string(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key) || !j[key].is_string())
    return bad(path + "." + key, "required string missing");
  return j[key].get<std::string>();
}

std::string opt_string(const json& j, const char* key, const std::string& dflt = {}) {
  if (j.contains(key) && j[key].is_string()) return j[key].get<std::string>();
  return dflt;
}

Result<ingest::ValueModel> parse_value_model(const json& j, const std::string& path) {
  ingest::ValueModel m;
  if (j.is_null()) return m;
  if (!j.is_object()) return bad(path, "must be an object");
  std::string kind = opt_string(j, "kind", "constant");
  auto dec = [&](const char* key, int64_t dflt) -> Result<int64_t> {
    if (!j.contains(key)) return dflt;
    if (j[key].is_string()) {
      auto v = silo::parse_decimal_x10(j[key].get<std::string>());
      if (!v) return bad(path + "." + key, "not a decimal with one decimal place");
      return *v;
    }
    if (j[key].is_number()) return int64_t(j[key].get<double>() * 10.0 + 0.5);
    return bad(path + "." + key, "must be a decimal string or number");
  };
  if (kind == "constant") {
    m.kind = ingest::ValueModel::Kind::constant;
    auto v = dec("value", 0);
    if (!v) return v.error();
    m.base_x10 = v.value();
  } else if (kind == "ramp") {
    m.kind = ingest::ValueModel::Kind::ramp;
    auto b = dec("start", 0);
    if (!b) return b.error();
    auto s = dec("step", 1);
    if (!s) return s.error();
    m.base_x10 = b.value();
    m.step_x10 = s.value();
  } else if (kind == "random") {
    m.kind = ingest::ValueModel::Kind::random;
    auto lo = dec("lo", 0);
    if (!lo) return lo.error();
    auto hi = dec("hi", 0);
    if (!hi) return hi.error();
    m.lo_x10 = lo.value();
    m.hi_x10 = hi.value();
    if (m.hi_x10 < m.lo_x10) return bad(path, "random model needs lo <= hi");
  } else {
    return bad(path + ".kind", "unknown value model: " + kind);
  }
  return m;
}

}  // namespace

const OrgSpec* HarnessConfig::org(const std::string& name) const {
  for (const auto& o : organizations)
    if (o.name == name) return &o;
  return nullptr;
}

const IdentitySpec* HarnessConfig::identity(const std::string& subject) const {
  for (const auto& i : identities)
    if (i.subject == subject) return &i;
  return nullptr;
}

Result<HarnessConfig> HarnessConfig::parse(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) return Error(Err::ConfigError, "config: not valid JSON");
  if (!j.is_object()) return Error(Err::ConfigError, "config: top level must be an object");

  HarnessConfig c;
  c.source_text = text;
  if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
  if (j.contains("link_latency_ms")) c.link_latency_ms = j["link_latency_ms"].get<uint64_t>();

  if (!j.contains("organizations") || !j["organizations"].is_array())
    return Error(Err::ConfigError, "organizations: required array missing");
  size_t idx = 0;
  for (const auto& o : j["organizations"]) {
    std::string path = "organizations[" + std::to_string(idx++) + "]";
    OrgSpec org;
    if (auto v = need_string(o, path, "name"); v) org.name = v.value(); else return v.error();
    for (auto [field, target] : {std::pair<const char*, CaSpec*>{"identity_ca", &org.identity_ca},
                                 {"transport_ca", &org.transport_ca}}) {
      if (!o.contains(field)) return bad(path + "." + field, "required object missing");
      const json& ca = o[field];
      if (ca.is_string()) {
        target->name = ca.get<std::string>();
      } else if (ca.is_object()) {
        if (auto v = need_string(ca, path + "." + field, "name"); v)
          target->name = v.value();
        else
          return v.error();
        target->host = opt_string(ca, "host");
      } else {
        return bad(path + "." + field, "must be a string or object");
      }
    }
    c.organizations.push_back(std::move(org));
  }

  if (!j.contains("peers") || !j["peers"].is_array())
    return Error(Err::ConfigError, "peers: required array missing");
  idx = 0;
  for (const auto& p : j["peers"]) {
    std::string path = "peers[" + std::to_string(idx++) + "]";
    PeerSpec peer;
    if (auto v = need_string(p, path, "name"); v) peer.name = v.value(); else return v.error();
    if (auto v = need_string(p, path, "org"); v) peer.org = v.value(); else return v.error();
    peer.host = opt_string(p, "host");
    if (p.contains("anchor")) peer.anchor = p["anchor"].get<bool>();
    c.peers.push_back(std::move(peer));
  }

  if (!j.contains("orderer") || !j["orderer"].is_object())
    return Error(Err::ConfigError, "orderer: required object missing");
  {
    const json& o = j["orderer"];
    if (auto v = need_string(o, "orderer", "name"); v) c.orderer.name = v.value(); else return v.error();
    if (auto v = need_string(o, "orderer", "org"); v) c.orderer.org = v.value(); else return v.error();
    c.orderer.host = opt_string(o, "host");
  }

  if (!j.contains("channels") || !j["channels"].is_array())
    return Error(Err::ConfigError, "channels: required array missing");
  idx = 0;
  for (const auto& ch : j["channels"]) {
    std::string path = "channels[" + std::to_string(idx++) + "]";
    ChannelSpec spec;
    if (auto v = need_string(ch, path, "name"); v) spec.name = v.value(); else return v.error();
    if (!ch.contains("members") || !ch["members"].is_array())
      return bad(path + ".members", "required array missing");
    for (const auto& m : ch["members"]) spec.members.push_back(m.get<std::string>());
    if (ch.contains("batch_max_count")) spec.batch_max_count = ch["batch_max_count"].get<uint32_t>();
    if (ch.contains("batch_timeout_ms")) spec.batch_timeout_ms = ch["batch_timeout_ms"].get<uint64_t>();
    if (ch.contains("policies")) {
      const json& pol = ch["policies"];
      for (auto [key, target] :
           {std::pair<const char*, std::vector<std::string>*>{"readers", &spec.readers},
            {"writers", &spec.writers},
            {"admins", &spec.admins}})
        if (pol.contains(key))
          for (const auto& s : pol[key]) target->push_back(s.get<std::string>());
    }
    if (ch.contains("chaincodes")) {
      size_t ci = 0;
      for (const auto& cc : ch["chaincodes"]) {
        std::string cpath = path + ".chaincodes[" + std::to_string(ci++) + "]";
        ChaincodeSpec ccs;
        if (auto v = need_string(cc, cpath, "name"); v) ccs.name = v.value(); else return v.error();
        if (auto v = need_string(cc, cpath, "endorsement"); v) ccs.endorsement = v.value(); else return v.error();
        if (cc.contains("install_on"))
          for (const auto& s : cc["install_on"]) ccs.install_on.push_back(s.get<std::string>());
        spec.chaincodes.push_back(std::move(ccs));
      }
    }
    c.channels.push_back(std::move(spec));
  }

  if (j.contains("identities")) {
    idx = 0;
    for (const auto& i : j["identities"]) {
      std::string path = "identities[" + std::to_string(idx++) + "]";
      IdentitySpec spec;
      if (auto v = need_string(i, path, "subject"); v) spec.subject = v.value(); else return v.error();
      if (auto v = need_string(i, path, "org"); v) spec.org = v.value(); else return v.error();
      if (auto v = need_string(i, path, "role"); v) spec.role = v.value(); else return v.error();
      if (i.contains("attributes"))
        for (const auto& [k, v] : i["attributes"].items())
          spec.attributes[k] = v.get<std::string>();
      c.identities.push_back(std::move(spec));
    }
  }

  if (j.contains("devices")) {
    idx = 0;
    for (const auto& d : j["devices"]) {
      std::string path = "devices[" + std::to_string(idx++) + "]";
      DeviceSpec spec;
      if (auto v = need_string(d, path, "device_id"); v) spec.device_id = v.value(); else return v.error();
      if (auto v = need_string(d, path, "identity"); v) spec.identity = v.value(); else return v.error();
      spec.owner_org = opt_string(d, "owner_org", "IoT");
      c.devices.push_back(std::move(spec));
    }
  }

  if (j.contains("grants")) {
    idx = 0;
    for (const auto& g : j["grants"]) {
      std::string path = "grants[" + std::to_string(idx++) + "]";
      GrantSpec spec;
      if (auto v = need_string(g, path, "device_id"); v) spec.device_id = v.value(); else return v.error();
      if (auto v = need_string(g, path, "org"); v) spec.org = v.value(); else return v.error();
      if (auto v = need_string(g, path, "subject"); v) spec.subject = v.value(); else return v.error();
      c.grants.push_back(std::move(spec));
    }
  }

  if (j.contains("topology") && !j["topology"].is_null()) {
    const json& t = j["topology"];
    ingest::TopologySpec spec;
    auto mode = ingest::topology_mode_from_name(opt_string(t, "mode", "direct"));
    if (!mode) return bad("topology.mode", mode.error().detail);
    spec.mode = mode.value();
    if (auto v = need_string(t, "topology", "channel"); v) spec.channel = v.value(); else return v.error();
    spec.chaincode = opt_string(t, "chaincode", "silomonitor");
    if (t.contains("duration_ms")) spec.duration_ms = t["duration_ms"].get<uint64_t>();
    spec.seed = t.contains("seed") ? t["seed"].get<uint64_t>() : c.seed;
    if (t.contains("gateway")) {
      if (t["gateway"].contains("buffer_capacity"))
        spec.gateway.buffer_capacity = t["gateway"]["buffer_capacity"].get<size_t>();
      if (t["gateway"].contains("flush_interval_ms"))
        spec.gateway.flush_interval_ms = t["gateway"]["flush_interval_ms"].get<uint64_t>();
    }
    if (t.contains("broker") && t["broker"].contains("monitor_subscribers"))
      spec.broker.monitor_subscribers = t["broker"]["monitor_subscribers"].get<uint32_t>();
    if (!t.contains("sources") || !t["sources"].is_array())
      return bad("topology.sources", "required array missing");
    size_t si = 0;
    for (const auto& s : t["sources"]) {
      std::string path = "topology.sources[" + std::to_string(si++) + "]";
      ingest::SourceSpec src;
      if (auto v = need_string(s, path, "device_id"); v) src.device_id = v.value(); else return v.error();
      if (s.contains("rate_per_s")) src.rate_per_s = s["rate_per_s"].get<double>();
      if (s.contains("count")) src.count = s["count"].get<uint64_t>();
      for (auto [key, target] :
           {std::pair<const char*, ingest::ValueModel*>{"temperature", &src.temperature},
            {"humidity", &src.humidity},
            {"nh3", &src.nh3}})
        if (s.contains(key)) {
          auto m = parse_value_model(s[key], path + "." + key);
          if (!m) return m.error();
          *target = m.value();
        }
      spec.sources.push_back(std::move(src));
    }
    c.topology = std::move(spec);
  }

  if (j.contains("workload") && !j["workload"].is_null()) {
    const json& w = j["workload"];
    WorkloadCfg wl;
    if (auto v = need_string(w, "workload", "channel"); v) wl.spec.channel = v.value(); else return v.error();
    wl.spec.chaincode = opt_string(w, "chaincode", "silomonitor");
    wl.spec.function = opt_string(w, "function", "ReadTemperature");
    if (w.contains("args"))
      for (const auto& a : w["args"]) wl.spec.args.push_back(a.get<std::string>());
    if (w.contains("tx_count")) wl.spec.tx_count = w["tx_count"].get<uint64_t>();
    if (w.contains("send_rate")) wl.spec.send_rate = w["send_rate"].get<double>();
    if (w.contains("client_count")) wl.spec.client_count = w["client_count"].get<uint32_t>();
    if (w.contains("warmup_count")) wl.spec.warmup_count = w["warmup_count"].get<uint64_t>();
    if (auto v = need_string(w, "workload", "identity"); v) wl.identity = v.value(); else return v.error();
    c.workload = std::move(wl);
  }

  return c;
}

Result<HarnessConfig> HarnessConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in.good()) return Error(Err::Io, "cannot read config: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

Result<void> HarnessConfig::validate() const {
  if (organizations.empty()) return Error(Err::ConfigError, "organizations: must be non-empty");
  std::set<std::string> org_names;
  std::set<std::string> ca_names;
  for (size_t i = 0; i < organizations.size(); ++i) {
    const auto& o = organizations[i];
    std::string path = "organizations[" + std::to_string(i) + "]";
    if (!org_names.insert(o.name).second) return bad(path + ".name", "duplicate organization");
    if (o.identity_ca.name.empty() || o.transport_ca.name.empty())
      return bad(path, "both CAs must be named");
    if (!ca_names.insert(o.identity_ca.name).second)
      return bad(path + ".identity_ca.name", "duplicate CA name");
    if (!ca_names.insert(o.transport_ca.name).second)
      return bad(path + ".transport_ca.name", "duplicate CA name");
  }

  std::set<std::string> peer_names;
  for (size_t i = 0; i < peers.size(); ++i) {
    const auto& p = peers[i];
    std::string path = "peers[" + std::to_string(i) + "]";
    if (!peer_names.insert(p.name).second) return bad(path + ".name", "duplicate peer name");
    if (org(p.org) == nullptr) return bad(path + ".org", "unknown organization: " + p.org);
  }

  if (orderer.name.empty()) return Error(Err::ConfigError, "orderer.name: must be set");
  if (org(orderer.org) == nullptr)
    return Error(Err::ConfigError, "orderer.org: unknown organization: " + orderer.org);

  std::set<std::string> subjects;
  bool orderer_admin = false;
  for (size_t i = 0; i < identities.size(); ++i) {
    const auto& id = identities[i];
    std::string path = "identities[" + std::to_string(i) + "]";
    if (!subjects.insert(id.subject).second) return bad(path + ".subject", "duplicate subject");
    if (org(id.org) == nullptr) return bad(path + ".org", "unknown organization: " + id.org);
    auto role = membership::role_from_name(id.role);
    if (!role) return bad(path + ".role", "unknown role: " + id.role);
    if (id.org == orderer.org) {
      // the orderer organization's CA issues only orderer and admin identities
      if (*role != membership::Role::admin && *role != membership::Role::orderer)
        return bad(path + ".role", "orderer organization issues only admin/orderer roles");
      if (*role == membership::Role::admin) orderer_admin = true;
    }
  }
  if (!channels.empty() && !orderer_admin)
    return Error(Err::ConfigError,
                 "identities: an admin identity for the orderer organization is required "
                 "to create channels");

  if (channels.empty()) return Error(Err::ConfigError, "channels: must be non-empty");
  std::set<std::string> channel_names;
  for (size_t i = 0; i < channels.size(); ++i) {
    const auto& ch = channels[i];
    std::string path = "channels[" + std::to_string(i) + "]";
    if (!channel_names.insert(ch.name).second) return bad(path + ".name", "duplicate channel");
    if (ch.batch_max_count < 1) return bad(path + ".batch_max_count", "must be >= 1");
    if (ch.members.empty()) return bad(path + ".members", "must be non-empty");
    for (const auto& m : ch.members)
      if (org(m) == nullptr) return bad(path + ".members", "unknown organization: " + m);
    if (ch.admins.empty()) return bad(path + ".policies.admins", "must be non-empty");
    for (auto [key, list] :
         {std::pair<const char*, const std::vector<std::string>*>{"readers", &ch.readers},
          {"writers", &ch.writers},
          {"admins", &ch.admins}})
      for (const auto& s : *list)
        if (auto p = policy::parse_principal(s); !p)
          return bad(path + ".policies." + key, p.error().detail);
    for (size_t ci = 0; ci < ch.chaincodes.size(); ++ci) {
      const auto& cc = ch.chaincodes[ci];
      std::string cpath = path + ".chaincodes[" + std::to_string(ci) + "]";
      if (auto p = policy::parse_policy(cc.endorsement); !p)
        return bad(cpath + ".endorsement", p.error().detail);
      for (const auto& peer_name : cc.install_on)
        if (peer_names.count(peer_name) == 0)
          return bad(cpath + ".install_on", "unknown peer: " + peer_name);
    }
  }

  for (size_t i = 0; i < devices.size(); ++i) {
    const auto& d = devices[i];
    std::string path = "devices[" + std::to_string(i) + "]";
    const IdentitySpec* id = identity(d.identity);
    if (id == nullptr) return bad(path + ".identity", "unknown identity: " + d.identity);
    if (id->role != "device") return bad(path + ".identity", "must reference a device role");
    auto attr = id->attributes.find(silo::SiloMonitor::kDeviceIdAttribute);
    if (attr == id->attributes.end() || attr->second != d.device_id)
      return bad(path + ".identity",
                 "device identity needs attribute deviceId=" + d.device_id);
    if (org(d.owner_org) == nullptr) return bad(path + ".owner_org", "unknown organization");
  }

  if (topology) {
    for (size_t i = 0; i < topology->sources.size(); ++i) {
      const auto& s = topology->sources[i];
      std::string path = "topology.sources[" + std::to_string(i) + "]";
      bool known = false;
      for (const auto& d : devices)
        if (d.device_id == s.device_id) known = true;
      if (!known) return bad(path + ".device_id", "not a configured device: " + s.device_id);
      if (s.rate_per_s <= 0) return bad(path + ".rate_per_s", "must be > 0");
    }
    if (channel_names.count(topology->channel) == 0)
      return Error(Err::ConfigError, "topology.channel: unknown channel");
  }

  if (workload) {
    if (channel_names.count(workload->spec.channel) == 0)
      return Error(Err::ConfigError, "workload.channel: unknown channel");
    if (identity(workload->identity) == nullptr)
      return Error(Err::ConfigError, "workload.identity: unknown identity");
    if (auto v = workload->spec.validate(); !v)
      return Error(Err::ConfigError, "workload: " + v.error().detail);
  }

  return {};
}

}  // namespace tamperled::cfg
