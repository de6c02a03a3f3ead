#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tamperled/bench.hpp"
#include "tamperled/error.hpp"
#include "tamperled/ingestion.hpp"

namespace tamperled::cfg {

struct CaSpec {
  std::string name;
  std::string host;
};

struct OrgSpec {
  std::string name;
  CaSpec identity_ca;
  CaSpec transport_ca;
};

struct PeerSpec {
  std::string name;
  std::string org;
  std::string host;
  bool anchor = true;
};

struct OrdererSpec {
  std::string name;
  std::string org;
  std::string host;
};

struct ChaincodeSpec {
  std::string name;
  std::string endorsement;  // prefix policy expression
  std::vector<std::string> install_on;
};

struct ChannelSpec {
  std::string name;
  std::vector<std::string> members;
  uint32_t batch_max_count = 10;
  uint64_t batch_timeout_ms = 500;
  std::vector<std::string> readers;
  std::vector<std::string> writers;
  std::vector<std::string> admins;
  std::vector<ChaincodeSpec> chaincodes;
};

struct IdentitySpec {
  std::string subject;
  std::string org;
  std::string role;
  std::map<std::string, std::string> attributes;
};

struct DeviceSpec {
  std::string device_id;
  std::string identity;  // subject of the device-role identity
  std::string owner_org = "IoT";
};

struct GrantSpec {
  std::string device_id;
  std::string org;
  std::string subject;  // or "*"
};

struct WorkloadCfg {
  bench::WorkloadSpec spec;
  std::string identity;  // issuing client subject
};

// Whole-harness configuration: one structured document drives netup.
struct HarnessConfig {
  uint64_t seed = 1;
  uint64_t link_latency_ms = 1;
  std::vector<OrgSpec> organizations;
  std::vector<PeerSpec> peers;
  OrdererSpec orderer;
  std::vector<ChannelSpec> channels;
  std::vector<IdentitySpec> identities;
  std::vector<DeviceSpec> devices;
  std::vector<GrantSpec> grants;
  std::optional<ingest::TopologySpec> topology;
  std::optional<WorkloadCfg> workload;

  // Raw document as parsed, kept verbatim for state-dir persistence.
  std::string source_text;

  static Result<HarnessConfig> parse(const std::string& text);
  static Result<HarnessConfig> load(const std::filesystem::path& path);

  // Referential integrity; error details name the offending field.
  Result<void> validate() const;

  const OrgSpec* org(const std::string& name) const;
  const IdentitySpec* identity(const std::string& subject) const;
};

}  // namespace tamperled::cfg
