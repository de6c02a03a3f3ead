#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tamperled/network.hpp"
#include "tamperled/sim.hpp"

namespace tamperled::ingest {

enum class TopologyMode { direct, gateway, broker };

const char* topology_mode_name(TopologyMode m);
Result<TopologyMode> topology_mode_from_name(const std::string& s);

// Per-field generator for synthetic telemetry. All values are tenths.
struct ValueModel {
  enum class Kind { constant, ramp, random };
  Kind kind = Kind::constant;
  int64_t base_x10 = 0;   // constant / ramp start
  int64_t step_x10 = 0;   // ramp increment per emission
  int64_t lo_x10 = 0;     // random bounds (inclusive)
  int64_t hi_x10 = 0;

  int64_t value(uint64_t index, sim::Rng& rng) const;
};

struct SourceSpec {
  std::string device_id;
  double rate_per_s = 1.0;  // emissions per second of logical time
  uint64_t count = 0;       // readings to emit
  ValueModel temperature{ValueModel::Kind::constant, 250, 0, 0, 0};
  ValueModel humidity{ValueModel::Kind::constant, 600, 0, 0, 0};
  ValueModel nh3{ValueModel::Kind::constant, 100, 0, 0, 0};
};

struct GatewayParams {
  size_t buffer_capacity = 16;
  uint64_t flush_interval_ms = 100;
};

struct BrokerParams {
  uint32_t monitor_subscribers = 1;  // non-submitting listeners per topic
};

struct TopologySpec {
  TopologyMode mode = TopologyMode::direct;
  std::string channel;
  std::string chaincode = "silomonitor";
  std::vector<SourceSpec> sources;
  GatewayParams gateway;
  BrokerParams broker;
  uint64_t duration_ms = 0;  // 0 = unbounded; otherwise emissions stop at this time
  uint64_t seed = 1;         // value-model seed, recorded in the report
};

struct IngestionReport {
  std::string mode;
  uint64_t seed = 0;
  uint64_t emitted = 0;
  uint64_t submitted = 0;
  uint64_t committed = 0;  // committed VALID
  uint64_t failed = 0;     // rejected or committed invalid
  uint64_t dropped = 0;    // gateway overflow
  uint64_t monitor_deliveries = 0;
  std::map<std::string, uint64_t> per_device_committed;

  std::string to_text() const;
  std::string to_json() const;
};

// Runs the configured topology to completion on the network's event loop.
// Every emitted reading becomes exactly one RecordReading proposal signed by
// the device identity at emission time; the topology only changes the path it
// takes to the submitting client. Per-device submissions are serialized on
// commit so histories stay gap-free.
Result<IngestionReport> run_topology(net::SimNetwork& net, const TopologySpec& spec,
                                     const std::map<std::string, net::Client*>& device_clients);

// XOR-flips one byte of a persisted block record. Offsets index the record
// bytes, not the frame prefix.
Result<void> inject_tamper(const std::filesystem::path& store_dir, uint64_t block_number,
                           uint64_t byte_offset);

}  // namespace tamperled::ingest
