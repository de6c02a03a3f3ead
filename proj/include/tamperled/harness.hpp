#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "tamperled/config.hpp"
#include "tamperled/network.hpp"

namespace tamperled::harness {

// State directory layout:
//   <dir>/config.json            copy of the harness config
//   <dir>/identities/            certificates, keys and CA material
//   <dir>/channels/<name>/       append-only block file + offset index
//   <dir>/reports/               ingestion and benchmark reports
inline constexpr const char* kConfigFileName = "config.json";

struct RunningNetwork {
  cfg::HarnessConfig config;
  std::unique_ptr<net::SimNetwork> net;
  std::map<std::string, net::Credentials> credentials;  // by subject
  std::map<std::string, net::Client*> clients;          // by subject
  std::map<std::string, net::Client*> device_clients;   // by device id
  std::filesystem::path state_dir;                      // empty when ephemeral

  net::Client* client_for(const std::string& subject) {
    auto it = clients.find(subject);
    return it == clients.end() ? nullptr : it->second;
  }
  Result<std::filesystem::path> channel_dir(const std::string& channel) const;
};

std::filesystem::path channel_store_dir(const std::filesystem::path& state_dir,
                                        const std::string& channel);

// Brings the whole network up from a config: CAs, identity and transport
// certificates, channels with genesis, peer joins, chaincode installs, device
// registration and configured access grants. With a state dir the first
// configured peer persists the canonical per-channel chain; a populated state
// dir is refused.
Result<RunningNetwork> netup(const cfg::HarnessConfig& config,
                             const std::filesystem::path& state_dir);

// Rebuilds the network from a state dir: stored CA keys and certificates,
// persisted chains (verified before use), world state by replay.
Result<RunningNetwork> resume(const std::filesystem::path& state_dir);

// Synchronous invoke helper: drives the loop until the commit callback fires.
Result<net::CommitEvent> invoke_and_wait(RunningNetwork& run, net::Client* client,
                                         const std::string& channel,
                                         const std::string& chaincode,
                                         const std::string& function,
                                         std::vector<Bytes> args);

}  // namespace tamperled::harness
