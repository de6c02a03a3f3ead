#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include "tamperled/chaincode.hpp"

namespace tamperled::silo {

// Grain-silo telemetry sample. Measurements are fixed-point decimals with one
// decimal place, stored as value*10 so rwset bytes are identical across
// platforms.
struct SensorReading {
  std::string device_id;
  uint64_t seq = 0;  // strictly increasing per device, starts at 1
  int64_t temperature_x10 = 0;
  int64_t humidity_x10 = 0;  // valid range [0, 1000]
  int64_t nh3_x10 = 0;       // valid range >= 0
  uint64_t timestamp_ms = 0;
};

struct DeviceRecord {
  std::string device_id;
  std::string owner_org;
  uint64_t registered_at_ms = 0;
  // (org, subject) pairs; subject "*" grants every subject of that org.
  std::set<std::pair<std::string, std::string>> authorized_readers;
};

// "25.0" / "25" / "-3.5" -> tenths. At most one decimal place.
std::optional<int64_t> parse_decimal_x10(const std::string& text);
std::string render_decimal_x10(int64_t value_x10);

std::string device_key(const std::string& device_id);
std::string latest_key(const std::string& device_id);
std::string history_key(const std::string& device_id, uint64_t seq);

// The Silo Monitoring contract. Functions:
//   RegisterDevice(device_id, owner_org)        — IoT admins only
//   RecordReading(device_id, temp, hum, nh3)    — the device itself only
//   ReadTemperature(device_id)                  — IoT org or granted readers
//   GetHistory(device_id, from_seq, to_seq)     — IoT org or granted readers
//   GrantAccess(device_id, org, subject|*)      — IoT admins only
//   RevokeAccess(device_id, org, subject|*)     — IoT admins only
// Access control runs inside the contract against the caller identity the
// endorsing peer validated.
class SiloMonitor : public chaincode::Chaincode {
 public:
  static constexpr const char* kName = "silomonitor";
  static constexpr const char* kOwnerOrg = "IoT";
  static constexpr const char* kDeviceIdAttribute = "deviceId";

  const std::string& name() const override { return name_; }
  Result<Bytes> invoke(const std::string& function, const std::vector<Bytes>& args,
                       chaincode::Stub& stub) override;

 private:
  Result<Bytes> register_device(const std::vector<Bytes>& args, chaincode::Stub& stub);
  Result<Bytes> record_reading(const std::vector<Bytes>& args, chaincode::Stub& stub);
  Result<Bytes> read_temperature(const std::vector<Bytes>& args, chaincode::Stub& stub);
  Result<Bytes> get_history(const std::vector<Bytes>& args, chaincode::Stub& stub);
  Result<Bytes> set_access(const std::vector<Bytes>& args, chaincode::Stub& stub, bool grant);

  std::string name_ = kName;
};

}  // namespace tamperled::silo
