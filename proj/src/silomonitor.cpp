#include "tamperled/silomonitor.hpp"

#include <cctype>
#include <charconv>

#include <json.hpp>

namespace tamperled::silo {

using json = nlohmann::json;
using membership::Role;

std::optional<int64_t> parse_decimal_x10(const std::string& text) {
  if (text.empty()) return std::nullopt;
  size_t i = 0;
  bool negative = false;
  if (text[0] == '-') {
    negative = true;
    i = 1;
    if (text.size() == 1) return std::nullopt;
  }
  int64_t whole = 0;
  size_t digits = 0;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    whole = whole * 10 + (text[i] - '0');
    if (whole > (int64_t(1) << 52)) return std::nullopt;  // absurd magnitude
    ++i;
    ++digits;
  }
  if (digits == 0) return std::nullopt;
  int64_t tenth = 0;
  if (i < text.size()) {
    if (text[i] != '.') return std::nullopt;
    ++i;
    if (i >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i])))
      return std::nullopt;
    tenth = text[i] - '0';
    ++i;
    if (i != text.size()) return std::nullopt;  // at most one decimal place
  }
  int64_t v = whole * 10 + tenth;
  return negative ? -v : v;
}

std::string render_decimal_x10(int64_t value_x10) {
  int64_t v = value_x10 < 0 ? -value_x10 : value_x10;
  std::string s = value_x10 < 0 ? "-" : "";
  s += std::to_string(v / 10);
  s += '.';
  s += char('0' + v % 10);
  return s;
}

std::string device_key(const std::string& device_id) { return "device/" + device_id; }
std::string latest_key(const std::string& device_id) { return "latest/" + device_id; }

std::string history_key(const std::string& device_id, uint64_t seq) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "%010llu", static_cast<unsigned long long>(seq));
  return "hist/" + device_id + "/" + buf;
}

namespace {

json reading_to_json(const SensorReading& r) {
  return json{{"device_id", r.device_id}, {"seq", r.seq},
              {"temp_x10", r.temperature_x10}, {"hum_x10", r.humidity_x10},
              {"nh3_x10", r.nh3_x10},          {"ts_ms", r.timestamp_ms}};
}

std::optional<SensorReading> reading_from_json(const Bytes& raw) {
  json j = json::parse(to_string(raw), nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  SensorReading r;
  try {
    r.device_id = j.at("device_id").get<std::string>();
    r.seq = j.at("seq").get<uint64_t>();
    r.temperature_x10 = j.at("temp_x10").get<int64_t>();
    r.humidity_x10 = j.at("hum_x10").get<int64_t>();
    r.nh3_x10 = j.at("nh3_x10").get<int64_t>();
    r.timestamp_ms = j.at("ts_ms").get<uint64_t>();
  } catch (const json::exception&) {
    return std::nullopt;
  }
  return r;
}

json device_to_json(const DeviceRecord& d) {
  json readers = json::array();
  for (const auto& [org, subject] : d.authorized_readers)
    readers.push_back(json::array({org, subject}));
  return json{{"device_id", d.device_id},
              {"owner_org", d.owner_org},
              {"registered_at_ms", d.registered_at_ms},
              {"readers", readers}};
}

std::optional<DeviceRecord> device_from_json(const Bytes& raw) {
  json j = json::parse(to_string(raw), nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  DeviceRecord d;
  try {
    d.device_id = j.at("device_id").get<std::string>();
    d.owner_org = j.at("owner_org").get<std::string>();
    d.registered_at_ms = j.at("registered_at_ms").get<uint64_t>();
    for (const auto& pair : j.at("readers"))
      d.authorized_readers.emplace(pair.at(0).get<std::string>(),
                                   pair.at(1).get<std::string>());
  } catch (const json::exception&) {
    return std::nullopt;
  }
  return d;
}

Bytes json_bytes(const json& j) { return to_bytes(j.dump()); }

bool is_iot_admin(const policy::Identity& caller) {
  return caller.org == SiloMonitor::kOwnerOrg && caller.role == Role::admin;
}

// Reader check: anyone from the owning IoT org, or an explicitly granted
// (org, subject) pair, or an org-wide "*" grant.
bool may_read(const policy::Identity& caller, const DeviceRecord& device) {
  if (caller.org == SiloMonitor::kOwnerOrg) return true;
  if (device.authorized_readers.count({caller.org, caller.subject}) > 0) return true;
  return device.authorized_readers.count({caller.org, "*"}) > 0;
}

std::string arg_str(const std::vector<Bytes>& args, size_t i) {
  return to_string(args.at(i));
}

Result<uint64_t> arg_u64(const std::vector<Bytes>& args, size_t i) {
  std::string s = arg_str(args, i);
  uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    return Error(Err::BadRequest, "argument " + std::to_string(i) + " must be an integer");
  return v;
}

}  // namespace

Result<Bytes> SiloMonitor::invoke(const std::string& function, const std::vector<Bytes>& args,
                                  chaincode::Stub& stub) {
  if (function == "RegisterDevice") return register_device(args, stub);
  if (function == "RecordReading") return record_reading(args, stub);
  if (function == "ReadTemperature") return read_temperature(args, stub);
  if (function == "GetHistory") return get_history(args, stub);
  if (function == "GrantAccess") return set_access(args, stub, true);
  if (function == "RevokeAccess") return set_access(args, stub, false);
  return Error(Err::ChaincodeError, "no such function: " + function);
}

Result<Bytes> SiloMonitor::register_device(const std::vector<Bytes>& args,
                                           chaincode::Stub& stub) {
  if (args.size() != 2) return Error(Err::BadRequest, "RegisterDevice(device_id, owner_org)");
  if (!is_iot_admin(stub.caller()))
    return Error(Err::AccessDenied, "RegisterDevice requires the IoT organization admin");
  const std::string device_id = arg_str(args, 0);
  if (device_id.empty()) return Error(Err::BadRequest, "empty device id");
  if (stub.get_state(device_key(device_id)))
    return Error(Err::AlreadyRegistered, device_id);
  DeviceRecord record;
  record.device_id = device_id;
  record.owner_org = arg_str(args, 1);
  record.registered_at_ms = stub.timestamp_ms();
  Bytes value = json_bytes(device_to_json(record));
  stub.put_state(device_key(device_id), value);
  return value;
}

Result<Bytes> SiloMonitor::record_reading(const std::vector<Bytes>& args,
                                          chaincode::Stub& stub) {
  if (args.size() != 4)
    return Error(Err::BadRequest, "RecordReading(device_id, temperature, humidity, nh3)");
  const std::string device_id = arg_str(args, 0);
  const auto& caller = stub.caller();
  if (caller.role != Role::device ||
      caller.attributes.count(kDeviceIdAttribute) == 0 ||
      caller.attributes.at(kDeviceIdAttribute) != device_id)
    return Error(Err::AccessDenied, "only the device " + device_id + " may record");

  auto temperature = parse_decimal_x10(arg_str(args, 1));
  auto humidity = parse_decimal_x10(arg_str(args, 2));
  auto nh3 = parse_decimal_x10(arg_str(args, 3));
  if (!temperature || !humidity || !nh3)
    return Error(Err::RangeError, "measurements must be decimals with one decimal place");
  if (*humidity < 0 || *humidity > 1000)
    return Error(Err::RangeError, "humidity must be within [0, 100]");
  if (*nh3 < 0) return Error(Err::RangeError, "nh3 must be >= 0");

  if (!stub.get_state(device_key(device_id))) return Error(Err::UnknownDevice, device_id);

  uint64_t seq = 1;
  if (auto latest_raw = stub.get_state(latest_key(device_id))) {
    auto latest = reading_from_json(*latest_raw);
    if (!latest) return Error(Err::ChaincodeError, "corrupt latest reading");
    seq = latest->seq + 1;
  }

  SensorReading reading;
  reading.device_id = device_id;
  reading.seq = seq;
  reading.temperature_x10 = *temperature;
  reading.humidity_x10 = *humidity;
  reading.nh3_x10 = *nh3;
  reading.timestamp_ms = stub.timestamp_ms();

  Bytes value = json_bytes(reading_to_json(reading));
  stub.put_state(latest_key(device_id), value);
  stub.put_state(history_key(device_id, seq), value);
  return json_bytes(json{{"seq", seq}});
}

Result<Bytes> SiloMonitor::read_temperature(const std::vector<Bytes>& args,
                                            chaincode::Stub& stub) {
  if (args.size() != 1) return Error(Err::BadRequest, "ReadTemperature(device_id)");
  const std::string device_id = arg_str(args, 0);
  auto device_raw = stub.get_state(device_key(device_id));
  if (!device_raw) return Error(Err::UnknownDevice, device_id);
  auto device = device_from_json(*device_raw);
  if (!device) return Error(Err::ChaincodeError, "corrupt device record");
  if (!may_read(stub.caller(), *device))
    return Error(Err::AccessDenied, stub.caller().subject + " may not read " + device_id);
  auto latest_raw = stub.get_state(latest_key(device_id));
  if (!latest_raw) return Error(Err::NoReadings, device_id);
  auto latest = reading_from_json(*latest_raw);
  if (!latest) return Error(Err::ChaincodeError, "corrupt latest reading");
  return json_bytes(json{{"device_id", device_id},
                         {"temperature", render_decimal_x10(latest->temperature_x10)},
                         {"ts_ms", latest->timestamp_ms}});
}

Result<Bytes> SiloMonitor::get_history(const std::vector<Bytes>& args, chaincode::Stub& stub) {
  if (args.size() != 3)
    return Error(Err::BadRequest, "GetHistory(device_id, from_seq, to_seq)");
  const std::string device_id = arg_str(args, 0);
  auto from = arg_u64(args, 1);
  if (!from) return from.error();
  auto to = arg_u64(args, 2);
  if (!to) return to.error();
  if (from.value() > to.value() || from.value() == 0)
    return Error(Err::BadRequest, "need 1 <= from_seq <= to_seq");

  auto device_raw = stub.get_state(device_key(device_id));
  if (!device_raw) return Error(Err::UnknownDevice, device_id);
  auto device = device_from_json(*device_raw);
  if (!device) return Error(Err::ChaincodeError, "corrupt device record");
  if (!may_read(stub.caller(), *device))
    return Error(Err::AccessDenied, stub.caller().subject + " may not read " + device_id);

  // Tip from the latest reading bounds the direct lookups; no range scan.
  uint64_t tip = 0;
  if (auto latest_raw = stub.get_state(latest_key(device_id))) {
    auto latest = reading_from_json(*latest_raw);
    if (!latest) return Error(Err::ChaincodeError, "corrupt latest reading");
    tip = latest->seq;
  }

  json out = json::array();
  for (uint64_t seq = from.value(); seq <= to.value() && seq <= tip; ++seq) {
    auto raw = stub.get_state(history_key(device_id, seq));
    if (!raw) continue;  // gap would violate the contract invariant; tolerate on read
    auto reading = reading_from_json(*raw);
    if (!reading) return Error(Err::ChaincodeError, "corrupt history entry");
    out.push_back(json{{"seq", reading->seq},
                       {"temperature", render_decimal_x10(reading->temperature_x10)},
                       {"humidity", render_decimal_x10(reading->humidity_x10)},
                       {"nh3", render_decimal_x10(reading->nh3_x10)},
                       {"ts_ms", reading->timestamp_ms}});
  }
  return json_bytes(out);
}

Result<Bytes> SiloMonitor::set_access(const std::vector<Bytes>& args, chaincode::Stub& stub,
                                      bool grant) {
  if (args.size() != 3)
    return Error(Err::BadRequest, "GrantAccess/RevokeAccess(device_id, org, subject|*)");
  if (!is_iot_admin(stub.caller()))
    return Error(Err::AccessDenied, "access management requires the IoT organization admin");
  const std::string device_id = arg_str(args, 0);
  auto device_raw = stub.get_state(device_key(device_id));
  if (!device_raw) return Error(Err::UnknownDevice, device_id);
  auto device = device_from_json(*device_raw);
  if (!device) return Error(Err::ChaincodeError, "corrupt device record");

  std::pair<std::string, std::string> entry{arg_str(args, 1), arg_str(args, 2)};
  if (entry.first.empty() || entry.second.empty())
    return Error(Err::BadRequest, "org and subject must be non-empty");
  if (grant)
    device->authorized_readers.insert(entry);
  else
    device->authorized_readers.erase(entry);

  Bytes value = json_bytes(device_to_json(*device));
  stub.put_state(device_key(device_id), value);
  return json_bytes(json{{"readers", device->authorized_readers.size()}});
}

}  // namespace tamperled::silo
