#include "tamperled/ingestion.hpp"

#include <cmath>
#include <memory>

#include <json.hpp>

#include "tamperled/blockfile.hpp"
#include "tamperled/silomonitor.hpp"

namespace tamperled::ingest {

using json = nlohmann::json;

const char* topology_mode_name(TopologyMode m) {
  switch (m) {
    case TopologyMode::direct: return "direct";
    case TopologyMode::gateway: return "gateway";
    case TopologyMode::broker: return "broker";
  }
  return "?";
}

Result<TopologyMode> topology_mode_from_name(const std::string& s) {
  if (s == "direct") return TopologyMode::direct;
  if (s == "gateway") return TopologyMode::gateway;
  if (s == "broker") return TopologyMode::broker;
  return Error(Err::TopologyConfigError, "unknown topology mode: " + s);
}

int64_t ValueModel::value(uint64_t index, sim::Rng& rng) const {
  switch (kind) {
    case Kind::constant:
      return base_x10;
    case Kind::ramp:
      return base_x10 + step_x10 * int64_t(index);
    case Kind::random: {
      if (hi_x10 <= lo_x10) return lo_x10;
      return lo_x10 + int64_t(rng.below(uint64_t(hi_x10 - lo_x10 + 1)));
    }
  }
  return base_x10;
}

std::string IngestionReport::to_text() const {
  std::string s;
  s += "ingestion mode=" + mode + " seed=" + std::to_string(seed) + "\n";
  s += "  emitted=" + std::to_string(emitted) + " submitted=" + std::to_string(submitted) +
       " committed=" + std::to_string(committed) + " failed=" + std::to_string(failed) +
       " dropped=" + std::to_string(dropped) + "\n";
  for (const auto& [dev, n] : per_device_committed)
    s += "  device " + dev + ": " + std::to_string(n) + " committed\n";
  return s;
}

std::string IngestionReport::to_json() const {
  json j{{"mode", mode},           {"seed", seed},     {"emitted", emitted},
         {"submitted", submitted}, {"committed", committed}, {"failed", failed},
         {"dropped", dropped},     {"monitor_deliveries", monitor_deliveries}};
  j["per_device_committed"] = per_device_committed;
  return j.dump(2);
}

namespace {

// Serializes RecordReading submissions per device: the next proposal goes out
// only after the previous one committed, so MVCC never invalidates in-order
// telemetry.
class DeviceSubmitter {
 public:
  DeviceSubmitter(net::Client* client, IngestionReport* report, std::string device_id)
      : client_(client), report_(report), device_id_(std::move(device_id)) {}

  void enqueue(tx::Proposal proposal) {
    queue_.push_back(std::move(proposal));
    ++report_->submitted;
    pump();
  }

 private:
  void pump() {
    if (in_flight_ || queue_.empty()) return;
    in_flight_ = true;
    tx::Proposal proposal = std::move(queue_.front());
    queue_.pop_front();
    client_->submit_proposal(std::move(proposal), [this](Result<net::CommitEvent> r) {
      if (r.ok() && r.value().flag == ledger::Validity::valid) {
        ++report_->committed;
        ++report_->per_device_committed[device_id_];
      } else {
        ++report_->failed;
      }
      in_flight_ = false;
      pump();
    });
  }

  net::Client* client_;
  IngestionReport* report_;
  std::string device_id_;
  std::deque<tx::Proposal> queue_;
  bool in_flight_ = false;
};

class Gateway {
 public:
  Gateway(net::SimNetwork& net, GatewayParams params, IngestionReport* report)
      : net_(net), params_(params), report_(report) {}

  void route_to(const std::string& device_id, DeviceSubmitter* submitter) {
    downstream_[device_id] = submitter;
  }

  void offer(tx::Proposal proposal) {
    if (buffer_.size() >= params_.buffer_capacity) {
      ++report_->dropped;
      return;
    }
    buffer_.push_back(std::move(proposal));
    arm_flush();
  }

  void expect_emissions(uint64_t n) { expected_ += n; }
  void note_emitted() { ++seen_; }

 private:
  void arm_flush() {
    if (flush_armed_) return;
    flush_armed_ = true;
    net_.loop().schedule_in(params_.flush_interval_ms, [this] {
      flush_armed_ = false;
      flush();
      if (!buffer_.empty() || seen_ < expected_) arm_flush();
    });
  }

  void flush() {
    // Emission order is preserved: the buffer drains front to back into the
    // per-device queues.
    for (auto& proposal : buffer_) {
      auto it = downstream_.find(to_string(proposal.args.at(0)));
      if (it != downstream_.end()) it->second->enqueue(std::move(proposal));
    }
    buffer_.clear();
  }

  net::SimNetwork& net_;
  GatewayParams params_;
  IngestionReport* report_;
  std::vector<tx::Proposal> buffer_;
  std::map<std::string, DeviceSubmitter*> downstream_;
  bool flush_armed_ = false;
  uint64_t expected_ = 0;
  uint64_t seen_ = 0;
};

// Topic pub/sub with per-topic FIFO and exactly-once delivery per subscriber.
class Broker {
 public:
  explicit Broker(net::SimNetwork& net) : net_(net) {}

  using Handler = std::function<void(const tx::Proposal&)>;

  void subscribe(const std::string& topic, Handler handler) {
    topics_[topic].push_back(std::move(handler));
  }

  void publish(const std::string& topic, tx::Proposal proposal) {
    auto it = topics_.find(topic);
    if (it == topics_.end()) return;
    auto shared = std::make_shared<tx::Proposal>(std::move(proposal));
    for (auto& handler : it->second) {
      Handler* h = &handler;
      net_.loop().post([h, shared] { (*h)(*shared); });
    }
  }

 private:
  net::SimNetwork& net_;
  std::map<std::string, std::vector<Handler>> topics_;
};

}  // namespace

Result<IngestionReport> run_topology(net::SimNetwork& net, const TopologySpec& spec,
                                     const std::map<std::string, net::Client*>& device_clients) {
  if (spec.sources.empty())
    return Error(Err::TopologyConfigError, "topology has no sources");
  for (const auto& src : spec.sources) {
    if (src.rate_per_s <= 0)
      return Error(Err::TopologyConfigError, "source rate must be > 0: " + src.device_id);
    if (device_clients.count(src.device_id) == 0)
      return Error(Err::TopologyConfigError,
                   "no device client for source: " + src.device_id);
  }
  if (spec.mode == TopologyMode::gateway && spec.gateway.buffer_capacity == 0)
    return Error(Err::TopologyConfigError, "gateway buffer capacity must be >= 1");

  auto report = std::make_shared<IngestionReport>();
  report->mode = topology_mode_name(spec.mode);
  report->seed = spec.seed;

  std::map<std::string, std::shared_ptr<DeviceSubmitter>> submitters;
  for (const auto& [dev, client] : device_clients)
    submitters[dev] = std::make_shared<DeviceSubmitter>(client, report.get(), dev);

  auto gateway = std::make_shared<Gateway>(net, spec.gateway, report.get());
  auto broker = std::make_shared<Broker>(net);
  if (spec.mode == TopologyMode::gateway)
    for (auto& [dev, sub] : submitters) gateway->route_to(dev, sub.get());
  if (spec.mode == TopologyMode::broker) {
    for (auto& [dev, sub] : submitters) {
      DeviceSubmitter* s = sub.get();
      broker->subscribe("silo/" + dev, [s](const tx::Proposal& p) { s->enqueue(p); });
      for (uint32_t i = 0; i < spec.broker.monitor_subscribers; ++i)
        broker->subscribe("silo/" + dev,
                          [report](const tx::Proposal&) { ++report->monitor_deliveries; });
    }
  }

  const uint64_t start_ms = net.loop().now_ms();
  uint64_t total_expected = 0;
  for (const auto& src : spec.sources) {
    // One value-model RNG per source, consumed in emission order, so the
    // emitted series depends only on the seed, never on the topology.
    auto value_rng = std::make_shared<sim::Rng>(
        spec.seed ^ sha256(to_bytes(src.device_id)).bytes[0] ^
        (uint64_t(sha256(to_bytes(src.device_id)).bytes[1]) << 8));
    net::Client* client = device_clients.at(src.device_id);
    DeviceSubmitter* submitter = submitters.at(src.device_id).get();

    for (uint64_t i = 0; i < src.count; ++i) {
      uint64_t at = start_ms + uint64_t(std::floor(double(i) * 1000.0 / src.rate_per_s));
      if (spec.duration_ms > 0 && at >= start_ms + spec.duration_ms) break;
      ++total_expected;
      SourceSpec source_copy = src;
      net.loop().schedule_at(at, [&net, report, gateway, broker, client, submitter,
                                  source_copy, value_rng, i, mode = spec.mode,
                                  channel = spec.channel, chaincode = spec.chaincode] {
        ++report->emitted;
        int64_t t = source_copy.temperature.value(i, *value_rng);
        int64_t h = source_copy.humidity.value(i, *value_rng);
        int64_t n = source_copy.nh3.value(i, *value_rng);
        // The device signs at emission time; gateways and brokers forward the
        // signed proposal opaquely.
        std::vector<Bytes> args{to_bytes(source_copy.device_id),
                                to_bytes(silo::render_decimal_x10(t)),
                                to_bytes(silo::render_decimal_x10(h)),
                                to_bytes(silo::render_decimal_x10(n))};
        tx::Proposal proposal =
            client->make_proposal(channel, chaincode, "RecordReading", std::move(args));
        switch (mode) {
          case TopologyMode::direct:
            submitter->enqueue(std::move(proposal));
            break;
          case TopologyMode::gateway:
            gateway->note_emitted();
            gateway->offer(std::move(proposal));
            break;
          case TopologyMode::broker:
            broker->publish("silo/" + source_copy.device_id, std::move(proposal));
            break;
        }
      });
    }
  }
  gateway->expect_emissions(total_expected);

  net.run();

  IngestionReport out = *report;
  return out;
}

Result<void> inject_tamper(const std::filesystem::path& store_dir, uint64_t block_number,
                           uint64_t byte_offset) {
  return blockfile::flip_record_byte(store_dir, block_number, byte_offset);
}

}  // namespace tamperled::ingest
